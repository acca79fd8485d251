#pragma once

#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hcbf/core_math.hpp"
#include "hcbf/dynamics.hpp"

namespace hcbf {

// Sign convention: h0 = d_min^2 - d^2, so h <= 0 is safe for every barrier
// in this module. Constraints take the form  dh2/dt <= -gamma2 * h2.

enum class HysteresisKind { Product, Constant };

/// delta = u * d * (1 - cos 2 vartheta) for Product (half the synergy gap bound),
/// or a fixed width for Constant.
struct HysteresisRule {
  HysteresisKind kind = HysteresisKind::Product;
  double value = 0;
  bool operator==(const HysteresisRule&) const = default;
};

/// Heading regressor of the barycenter row. Exact differentiates the speed
/// term u_b too; Rotation keeps only the rotation of v_b, so spreading the
/// headings apart is not rewarded.
enum class BarycenterRegressor { Exact, Rotation };

const char* to_string(BarycenterRegressor r);

struct ScbfParams {
  double vartheta = std::numbers::pi / 4;
  double gamma0 = 1.0;
  double gamma2 = 0.1;
  HysteresisRule hysteresis;
  double excluded_ball = 0.1;
  BarycenterRegressor barycenter_regressor = BarycenterRegressor::Exact;

  bool valid() const {
    return vartheta > 0 && vartheta < std::numbers::pi / 2 && gamma0 > 0 && gamma2 > 0 && excluded_ball > 0;
  }
  bool operator==(const ScbfParams&) const = default;
};

enum class PairKind { AgentObstacle, AgentAgent, BarycenterObstacle };

const char* to_string(PairKind kind);

/// One barrier relationship and its discrete mode q in {-1, +1}.
/// For AgentAgent i < j. For BarycenterObstacle i is unused (-1).
struct SafetyPair {
  PairKind kind = PairKind::AgentObstacle;
  int i = 0;
  int j = 0;
  double d_min = 0;
  int q = 1;
  double d_min_latch = 0;  // barycenter only
  bool latch_active = false;
};

/// Snapshot of everything a barrier needs: agent i (and j), or the whole
/// fleet for the barycenter variant, plus the obstacle.
struct PairState {
  PairKind kind = PairKind::AgentObstacle;
  std::vector<AgentState> agents;  // [i], [i, j] or the fleet
  ObstacleState obstacle;          // ignored for AgentAgent
  double d_min = 0;                // d_ij_min, or the latched d_bj_min

  static PairState agent_obstacle(const AgentState& ai, const ObstacleState& obs, double d_min);
  static PairState agent_agent(const AgentState& ai, const AgentState& aj, double d_min);
  static PairState barycenter(std::vector<AgentState> fleet, const ObstacleState& obs, double d_bj_min);

  /// Position and velocity of the rotated side (agent i or barycenter).
  Vec2d own_position() const;
  Vec2d own_velocity() const;
  /// Position, velocity and drift acceleration of the partner.
  Vec2d partner_position() const;
  Vec2d partner_velocity() const;
  Vec2d partner_drift_acceleration() const;
  /// Speed u_i (or u_b) and distance d_ij (or d_bj).
  double own_speed() const;
  double distance() const;
};

/// Barrier values and Lie derivatives of h2 for one mode.
///
/// lg_r(k), lg_a(k) are the coefficients of r and a of the k-th agent in
/// PairState::agents. For AgentAgent, index 0 is agent i and index 1 agent j.
struct BarrierEval {
  double h0 = 0;
  double h1 = 0;
  double h2 = 0;
  double lf_h2 = 0;
  Eigen::VectorXd lg_r;
  Eigen::VectorXd lg_a;
  double synergy_headroom = 0;  // h2(x, q) - min_q h2(x, q)

  double lg_r_i() const { return lg_r(0); }
  double lg_a_i() const { return lg_a(0); }
  double lg_r_j() const { return lg_r.size() > 1 ? lg_r(1) : 0.0; }
  double lg_a_j() const { return lg_a.size() > 1 ? lg_a(1) : 0.0; }
};

template <typename Scalar>
Scalar h0_pair(const Vec2<Scalar>& p_i, const Vec2<Scalar>& p_j, Scalar d_min) {
  return d_min * d_min - (p_j - p_i).squaredNorm();
}

/// h1 = 2 p_ij^T (v_i - v_j) + gamma0 * h0 with p_ij = p_j - p_i.
template <typename Scalar>
Scalar h1_pair(const Vec2<Scalar>& p_i, const Vec2<Scalar>& v_i, const Vec2<Scalar>& p_j,
               const Vec2<Scalar>& v_j, Scalar d_min, Scalar gamma0) {
  const Vec2<Scalar> p_ij = p_j - p_i;
  return 2 * p_ij.dot(v_i - v_j) + gamma0 * h0_pair(p_i, p_j, d_min);
}

/// h2 value only: 2 p^T R(q vartheta) v_own - 2 p^T v_partner + gamma0 h0 + 4 d u_own sin(vartheta).
template <typename Scalar>
Scalar h2_value(const Vec2<Scalar>& p_own, const Vec2<Scalar>& v_own, const Vec2<Scalar>& p_partner,
                const Vec2<Scalar>& v_partner, Scalar d_min, int q, Scalar vartheta, Scalar gamma0) {
  const Vec2<Scalar> p = p_partner - p_own;
  const Scalar d = p.norm();
  const Mat2<Scalar> r = rot<Scalar>(q * vartheta);
  return 2 * p.dot(r * v_own) - 2 * p.dot(v_partner) + gamma0 * h0_pair(p_own, p_partner, d_min) +
         4 * d * v_own.norm() * std::sin(vartheta);
}

/// Full evaluation for mode q. Throws DegenerateGeometry inside the excluded
/// ball, or for a barycenter with zero speed.
BarrierEval evaluate(const PairState& x, int q, const ScbfParams& params);

BarrierEval h2_pair(const AgentState& ai, const ObstacleState& obs, double d_min, int q, const ScbfParams& params);
BarrierEval h2_agents(const AgentState& ai, const AgentState& aj, double d_min, int q, const ScbfParams& params);
BarrierEval h2_barycenter(std::span<const AgentState> fleet, const ObstacleState& obs, double d_bj_min, int q,
                          const ScbfParams& params);

struct ModeChoice {
  double m2 = 0;
  int argmin = 1;
};

/// min over q of h2. Ties (|difference| < 1e-12) keep current_q.
ModeChoice min_mode(const PairState& x, int current_q, const ScbfParams& params);

/// 2 u d (1 - cos 2 vartheta).
double synergy_gap_lower_bound(double u, double d, const ScbfParams& params);

double hysteresis_width(const PairState& x, const ScbfParams& params);

struct JumpOutcome {
  SafetyPair pair;
  bool jumped = false;
  double h2_before = 0;
  double h2_after = 0;
  double delta = 0;
  double headroom = 0;
};

/// Hysteresis switch: if h2(x, q) - m2(x) >= delta(x), q <- argmin.
JumpOutcome jump_update(const SafetyPair& pair, const PairState& x, const ScbfParams& params);

/// Initial mode: argmin with ties resolved to +1.
int initial_mode(const PairState& x, const ScbfParams& params);

struct BarycenterGeometry {
  Vec2d p_b = Vec2d::Zero();
  Vec2d v_b = Vec2d::Zero();
  double u_b = 0;
  double d_f = 0;
  double d_f_d = 0;
  double d_bj_min_raw = 0;
};

/// Barycenter, its velocity, current and desired formation radii, and the
/// unlatched barycenter safety distance max_i d_ij_min + max(d_f, d_f_d).
BarycenterGeometry barycenter_geometry(std::span<const AgentState> states, std::span<const Vec2d> offsets,
                                       std::span<const double> d_ij_min);

/// Nonincreasing latch of d_bj_min while the obstacle is within 2 * raw of
/// the barycenter; re-initialised to raw outside.
SafetyPair latch_d_bj_min(const SafetyPair& pair, double raw, double d_bj);

}  // namespace hcbf
