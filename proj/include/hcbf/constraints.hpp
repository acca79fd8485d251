#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hcbf/dynamics.hpp"
#include "hcbf/scbf.hpp"

namespace hcbf {

enum class ConstraintMode { PairwiseObstacle, BarycenterObstacle, Both };

const char* to_string(ConstraintMode mode);

/// One row  coefficients . r <= bound  over the stacked heading-rate vector.
struct ConstraintRow {
  Eigen::VectorXd coefficients;
  double bound = 0;
  SafetyPair source;
  bool active_hint = true;  // false when every coefficient is below the numerical floor
};

struct ConstraintSystem {
  std::vector<ConstraintRow> rows;
  Eigen::VectorXd r_max;  // symmetric box |r_k| <= r_max(k)
  int n_agents = 0;

  Eigen::MatrixXd G() const;
  Eigen::VectorXd b() const;
};

/// Coefficient magnitude below which a row is flagged near-critical.
inline constexpr double kCoefficientFloor = 1e-10;

/// Builds the pair snapshot the barrier formulas need. Obstacle indices are
/// positions in `obstacles`; barycenter pairs use their latched distance.
PairState make_pair_state(const SafetyPair& pair, std::span<const AgentState> agents,
                          std::span<const ObstacleState> obstacles);

ConstraintRow row_agent_obstacle(const SafetyPair& pair, const AgentState& ai, const ObstacleState& obs,
                                 double a_i_desired, int n_agents, const ScbfParams& params);

ConstraintRow row_agent_agent(const SafetyPair& pair, const AgentState& ai, const AgentState& aj,
                              double a_i_desired, double a_j_desired, int n_agents, const ScbfParams& params);

ConstraintRow row_barycenter(const SafetyPair& pair, std::span<const AgentState> agents, const ObstacleState& obs,
                             std::span<const double> a_desired, const ScbfParams& params);

/// Stacks the rows selected by `mode` in deterministic order: agent-obstacle
/// rows by (i, j), barycenter rows by j, then agent-agent rows by (i, j).
ConstraintSystem assemble(std::span<const SafetyPair> pairs, std::span<const AgentState> agents,
                          std::span<const ObstacleState> obstacles, std::span<const double> a_desired,
                          std::span<const AgentLimits> limits, const ScbfParams& params, ConstraintMode mode);

/// Whether `mode` draws rows from pairs of this kind.
bool mode_includes(ConstraintMode mode, PairKind kind);

/// Constants of the sufficient feasibility condition for one agent-obstacle pair.
struct FeasibilityParams {
  double beta1 = 0;
  double beta2 = 0;
  double beta3 = 0;
  double gamma = 0;
  double u_omax = 0;
  double a_omax = 0;
};

FeasibilityParams feasibility_params(const AgentLimits& limits, double d_min, double gamma, double u_omax,
                                     double a_omax);

/// 4 b1 sin^2 t - (sqrt5 b1 + b2) sin t - b3.
double feasibility_expression(const FeasibilityParams& f, double vartheta);

struct FeasibilityMargin {
  double margin = 0;
  double vartheta = 0;
  double gamma = 0;
  FeasibilityParams params;
  bool certified() const { return margin > 0; }
};

/// Maximum of the expression over an open vartheta grid on (0, pi/2) at fixed gamma.
FeasibilityMargin feasibility_margin(const AgentLimits& limits, double d_min, double gamma, double u_omax,
                                     double a_omax, int vartheta_grid = 10000);

/// Joint sweep over vartheta and a log-spaced gamma grid on [gamma_lo, gamma_hi].
FeasibilityMargin feasibility_margin_joint(const AgentLimits& limits, double d_min, double u_omax, double a_omax,
                                           double gamma_lo = 1e-3, double gamma_hi = 10.0, int gamma_grid = 200,
                                           int vartheta_grid = 10000);

}  // namespace hcbf
