#include "hcbf/scbf.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hcbf {

namespace {

constexpr double kModeTieTolerance = 1e-12;
constexpr double kMinBarycenterSpeed = 1e-9;

void check_distance(double d, const ScbfParams& params) {
  if (!(d >= params.excluded_ball)) {
    std::ostringstream os;
    os << "pair distance " << d << " m inside excluded ball of radius " << params.excluded_ball << " m";
    throw DegenerateGeometry(os.str());
  }
}

}  // namespace

const char* to_string(PairKind kind) {
  switch (kind) {
    case PairKind::AgentObstacle:
      return "agent-obstacle";
    case PairKind::AgentAgent:
      return "agent-agent";
    case PairKind::BarycenterObstacle:
      return "barycenter-obstacle";
  }
  return "unknown";
}

const char* to_string(BarycenterRegressor r) { return r == BarycenterRegressor::Exact ? "exact" : "rotation"; }

PairState PairState::agent_obstacle(const AgentState& ai, const ObstacleState& obs, double d_min) {
  return {PairKind::AgentObstacle, {ai}, obs, d_min};
}

PairState PairState::agent_agent(const AgentState& ai, const AgentState& aj, double d_min) {
  return {PairKind::AgentAgent, {ai, aj}, ObstacleState{}, d_min};
}

PairState PairState::barycenter(std::vector<AgentState> fleet, const ObstacleState& obs, double d_bj_min) {
  return {PairKind::BarycenterObstacle, std::move(fleet), obs, d_bj_min};
}

Vec2d PairState::own_position() const {
  if (kind != PairKind::BarycenterObstacle) return agents.front().p;
  Vec2d s = Vec2d::Zero();
  for (const auto& a : agents) s += a.p;
  return s / static_cast<double>(agents.size());
}

Vec2d PairState::own_velocity() const {
  if (kind != PairKind::BarycenterObstacle) return agents.front().velocity();
  Vec2d s = Vec2d::Zero();
  for (const auto& a : agents) s += a.velocity();
  return s / static_cast<double>(agents.size());
}

Vec2d PairState::partner_position() const {
  return kind == PairKind::AgentAgent ? agents[1].p : obstacle.p;
}

Vec2d PairState::partner_velocity() const {
  return kind == PairKind::AgentAgent ? agents[1].velocity() : obstacle.v;
}

Vec2d PairState::partner_drift_acceleration() const {
  // An agent partner has no drift acceleration; its inputs enter through lg.
  return kind == PairKind::AgentAgent ? Vec2d::Zero() : obstacle.a;
}

double PairState::own_speed() const {
  return kind == PairKind::BarycenterObstacle ? own_velocity().norm() : agents.front().u;
}

double PairState::distance() const { return (partner_position() - own_position()).norm(); }

BarrierEval evaluate(const PairState& x, int q, const ScbfParams& params) {
  const Mat2d S = quarter_turn<double>();
  const Mat2d R = rot(q * params.vartheta);
  const double s = std::sin(params.vartheta);

  const Vec2d p_own = x.own_position();
  const Vec2d v_own = x.own_velocity();
  const Vec2d p_j = x.partner_position();
  const Vec2d v_j = x.partner_velocity();
  const Vec2d a_j = x.partner_drift_acceleration();

  const Vec2d p = p_j - p_own;
  const Vec2d w = v_j - v_own;  // dp/dt
  const double d = p.norm();
  check_distance(d, params);

  double u_own = x.own_speed();
  if (x.kind == PairKind::BarycenterObstacle && u_own < kMinBarycenterSpeed) {
    throw DegenerateGeometry("barycenter speed is zero");
  }

  BarrierEval e;
  e.h0 = x.d_min * x.d_min - d * d;
  e.h1 = 2.0 * p.dot(v_own - v_j) + params.gamma0 * e.h0;
  e.h2 = 2.0 * p.dot(R * v_own) - 2.0 * p.dot(v_j) + params.gamma0 * e.h0 + 4.0 * d * u_own * s;

  // Drift: positions move, headings and speeds are frozen, obstacle may accelerate.
  e.lf_h2 = 2.0 * w.dot(R * v_own) - 2.0 * w.dot(v_j) - 2.0 * p.dot(a_j) - 2.0 * params.gamma0 * p.dot(w) +
            4.0 * s * u_own * p.dot(w) / d;

  const Eigen::RowVector2d pR = p.transpose() * R;
  switch (x.kind) {
    case PairKind::AgentObstacle: {
      const AgentState& ai = x.agents[0];
      const Vec2d n_i = heading(ai.psi);
      e.lg_r.resize(1);
      e.lg_a.resize(1);
      e.lg_r(0) = 2.0 * ai.u * pR.dot(S * n_i);
      e.lg_a(0) = 2.0 * pR.dot(n_i) + 4.0 * s * d;
      break;
    }
    case PairKind::AgentAgent: {
      const AgentState& ai = x.agents[0];
      const AgentState& aj = x.agents[1];
      const Vec2d n_i = heading(ai.psi);
      const Vec2d n_j = heading(aj.psi);
      e.lg_r.resize(2);
      e.lg_a.resize(2);
      e.lg_r(0) = 2.0 * ai.u * pR.dot(S * n_i);
      e.lg_a(0) = 2.0 * pR.dot(n_i) + 4.0 * s * d;
      // Agent j enters only through -2 p^T v_j, so its regressor does not depend on q.
      e.lg_r(1) = -2.0 * aj.u * p.dot(S * n_j);
      e.lg_a(1) = -2.0 * p.dot(n_j);
      break;
    }
    case PairKind::BarycenterObstacle: {
      const auto n = static_cast<double>(x.agents.size());
      e.lg_r.resize(x.agents.size());
      e.lg_a.resize(x.agents.size());
      for (std::size_t k = 0; k < x.agents.size(); ++k) {
        const AgentState& ak = x.agents[k];
        const Vec2d n_k = heading(ak.psi);
        // d(v_b)/dr_k = u_k S n_k / n, d(v_b)/da_k = n_k / n; u_b = |v_b| also moves.
        e.lg_r(k) = 2.0 / n * ak.u * pR.dot(S * n_k);
        if (params.barycenter_regressor == BarycenterRegressor::Exact) {
          e.lg_r(k) += 4.0 * s * d * ak.u * v_own.dot(S * n_k) / (n * u_own);
        }
        e.lg_a(k) = 2.0 / n * pR.dot(n_k) + 4.0 * s * d * v_own.dot(n_k) / (n * u_own);
      }
      break;
    }
  }
  return e;
}

BarrierEval h2_pair(const AgentState& ai, const ObstacleState& obs, double d_min, int q, const ScbfParams& params) {
  const PairState x = PairState::agent_obstacle(ai, obs, d_min);
  BarrierEval e = evaluate(x, q, params);
  e.synergy_headroom = e.h2 - min_mode(x, q, params).m2;
  return e;
}

BarrierEval h2_agents(const AgentState& ai, const AgentState& aj, double d_min, int q, const ScbfParams& params) {
  const PairState x = PairState::agent_agent(ai, aj, d_min);
  BarrierEval e = evaluate(x, q, params);
  e.synergy_headroom = e.h2 - min_mode(x, q, params).m2;
  return e;
}

BarrierEval h2_barycenter(std::span<const AgentState> fleet, const ObstacleState& obs, double d_bj_min, int q,
                          const ScbfParams& params) {
  const PairState x = PairState::barycenter({fleet.begin(), fleet.end()}, obs, d_bj_min);
  BarrierEval e = evaluate(x, q, params);
  e.synergy_headroom = e.h2 - min_mode(x, q, params).m2;
  return e;
}

ModeChoice min_mode(const PairState& x, int current_q, const ScbfParams& params) {
  const double plus = evaluate(x, +1, params).h2;
  const double minus = evaluate(x, -1, params).h2;
  if (std::abs(plus - minus) < kModeTieTolerance) {
    return {std::min(plus, minus), current_q};
  }
  return plus < minus ? ModeChoice{plus, +1} : ModeChoice{minus, -1};
}

double synergy_gap_lower_bound(double u, double d, const ScbfParams& params) {
  return 2.0 * u * d * (1.0 - std::cos(2.0 * params.vartheta));
}

double hysteresis_width(const PairState& x, const ScbfParams& params) {
  switch (params.hysteresis.kind) {
    case HysteresisKind::Product:
      return x.own_speed() * x.distance() * (1.0 - std::cos(2.0 * params.vartheta));
    case HysteresisKind::Constant:
      return params.hysteresis.value;
  }
  return 0.0;
}

JumpOutcome jump_update(const SafetyPair& pair, const PairState& x, const ScbfParams& params) {
  JumpOutcome out;
  out.pair = pair;
  const double h2_now = evaluate(x, pair.q, params).h2;
  const ModeChoice best = min_mode(x, pair.q, params);
  out.delta = hysteresis_width(x, params);
  out.headroom = h2_now - best.m2;
  out.h2_before = h2_now;
  out.h2_after = h2_now;
  if (out.headroom >= out.delta && best.argmin != pair.q) {
    out.pair.q = best.argmin;
    out.jumped = true;
    out.h2_after = best.m2;
  }
  return out;
}

int initial_mode(const PairState& x, const ScbfParams& params) {
  return min_mode(x, +1, params).argmin;
}

BarycenterGeometry barycenter_geometry(std::span<const AgentState> states, std::span<const Vec2d> offsets,
                                       std::span<const double> d_ij_min) {
  BarycenterGeometry g;
  if (states.empty()) return g;
  const auto n = static_cast<double>(states.size());
  for (const auto& s : states) {
    g.p_b += s.p;
    g.v_b += s.velocity();
  }
  g.p_b /= n;
  g.v_b /= n;
  g.u_b = g.v_b.norm();
  for (const auto& s : states) g.d_f = std::max(g.d_f, (s.p - g.p_b).norm());
  for (const auto& o : offsets) g.d_f_d = std::max(g.d_f_d, o.norm());
  double d_max = 0;
  for (double d : d_ij_min) d_max = std::max(d_max, d);
  g.d_bj_min_raw = d_max + std::max(g.d_f, g.d_f_d);
  return g;
}

SafetyPair latch_d_bj_min(const SafetyPair& pair, double raw, double d_bj) {
  SafetyPair out = pair;
  const bool inside = d_bj <= 2.0 * raw;
  if (!inside) {
    out.latch_active = false;
    out.d_min_latch = raw;
  } else if (!pair.latch_active) {
    out.latch_active = true;
    out.d_min_latch = raw;
  } else {
    out.d_min_latch = std::min(pair.d_min_latch, raw);
  }
  out.d_min = out.d_min_latch;
  return out;
}

}  // namespace hcbf
