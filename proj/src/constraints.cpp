#include "hcbf/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hcbf {

namespace {

ConstraintRow finish_row(const SafetyPair& pair, const BarrierEval& e, std::span<const int> agent_index,
                         std::span<const double> a_desired, int n_agents, const ScbfParams& params) {
  ConstraintRow row;
  row.source = pair;
  row.coefficients = Eigen::VectorXd::Zero(n_agents);
  double accel_term = 0;
  for (std::size_t k = 0; k < agent_index.size(); ++k) {
    row.coefficients(agent_index[k]) = e.lg_r(static_cast<Eigen::Index>(k));
    accel_term += e.lg_a(static_cast<Eigen::Index>(k)) * a_desired[k];
  }
  row.bound = -e.lf_h2 - accel_term - params.gamma2 * e.h2;
  row.active_hint = row.coefficients.cwiseAbs().maxCoeff() > kCoefficientFloor;
  return row;
}

int pair_order(PairKind kind) {
  switch (kind) {
    case PairKind::AgentObstacle:
      return 0;
    case PairKind::BarycenterObstacle:
      return 1;
    case PairKind::AgentAgent:
      return 2;
  }
  return 3;
}

}  // namespace

const char* to_string(ConstraintMode mode) {
  switch (mode) {
    case ConstraintMode::PairwiseObstacle:
      return "pairwise-obstacle";
    case ConstraintMode::BarycenterObstacle:
      return "barycenter-obstacle";
    case ConstraintMode::Both:
      return "both";
  }
  return "unknown";
}

Eigen::MatrixXd ConstraintSystem::G() const {
  Eigen::MatrixXd g(static_cast<Eigen::Index>(rows.size()), n_agents);
  for (std::size_t k = 0; k < rows.size(); ++k) g.row(static_cast<Eigen::Index>(k)) = rows[k].coefficients;
  return g;
}

Eigen::VectorXd ConstraintSystem::b() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) v(static_cast<Eigen::Index>(k)) = rows[k].bound;
  return v;
}

bool mode_includes(ConstraintMode mode, PairKind kind) {
  switch (kind) {
    case PairKind::AgentAgent:
      return true;
    case PairKind::AgentObstacle:
      return mode != ConstraintMode::BarycenterObstacle;
    case PairKind::BarycenterObstacle:
      return mode != ConstraintMode::PairwiseObstacle;
  }
  return false;
}

PairState make_pair_state(const SafetyPair& pair, std::span<const AgentState> agents,
                          std::span<const ObstacleState> obstacles) {
  switch (pair.kind) {
    case PairKind::AgentObstacle:
      return PairState::agent_obstacle(agents[pair.i], obstacles[pair.j], pair.d_min);
    case PairKind::AgentAgent:
      return PairState::agent_agent(agents[pair.i], agents[pair.j], pair.d_min);
    case PairKind::BarycenterObstacle:
      return PairState::barycenter({agents.begin(), agents.end()}, obstacles[pair.j], pair.d_min_latch);
  }
  throw std::logic_error("make_pair_state: unknown pair kind");
}

ConstraintRow row_agent_obstacle(const SafetyPair& pair, const AgentState& ai, const ObstacleState& obs,
                                 double a_i_desired, int n_agents, const ScbfParams& params) {
  const BarrierEval e = evaluate(PairState::agent_obstacle(ai, obs, pair.d_min), pair.q, params);
  const int idx[] = {pair.i};
  const double acc[] = {a_i_desired};
  return finish_row(pair, e, idx, acc, n_agents, params);
}

ConstraintRow row_agent_agent(const SafetyPair& pair, const AgentState& ai, const AgentState& aj,
                              double a_i_desired, double a_j_desired, int n_agents, const ScbfParams& params) {
  const BarrierEval e = evaluate(PairState::agent_agent(ai, aj, pair.d_min), pair.q, params);
  const int idx[] = {pair.i, pair.j};
  const double acc[] = {a_i_desired, a_j_desired};
  return finish_row(pair, e, idx, acc, n_agents, params);
}

ConstraintRow row_barycenter(const SafetyPair& pair, std::span<const AgentState> agents, const ObstacleState& obs,
                             std::span<const double> a_desired, const ScbfParams& params) {
  const PairState x = PairState::barycenter({agents.begin(), agents.end()}, obs, pair.d_min_latch);
  if (x.own_speed() <= 0) throw DegenerateGeometry("row_barycenter: barycenter speed is zero");
  const BarrierEval e = evaluate(x, pair.q, params);
  std::vector<int> idx(agents.size());
  for (std::size_t k = 0; k < agents.size(); ++k) idx[k] = static_cast<int>(k);
  return finish_row(pair, e, idx, a_desired, static_cast<int>(agents.size()), params);
}

ConstraintSystem assemble(std::span<const SafetyPair> pairs, std::span<const AgentState> agents,
                          std::span<const ObstacleState> obstacles, std::span<const double> a_desired,
                          std::span<const AgentLimits> limits, const ScbfParams& params, ConstraintMode mode) {
  ConstraintSystem sys;
  sys.n_agents = static_cast<int>(agents.size());
  sys.r_max.resize(sys.n_agents);
  for (int k = 0; k < sys.n_agents; ++k) sys.r_max(k) = limits[k].r_max;

  std::vector<const SafetyPair*> selected;
  for (const auto& p : pairs) {
    if (mode_includes(mode, p.kind)) selected.push_back(&p);
  }
  std::stable_sort(selected.begin(), selected.end(), [](const SafetyPair* a, const SafetyPair* b) {
    const int oa = pair_order(a->kind);
    const int ob = pair_order(b->kind);
    if (oa != ob) return oa < ob;
    if (a->kind == PairKind::BarycenterObstacle) return a->j < b->j;
    return a->i != b->i ? a->i < b->i : a->j < b->j;
  });

  sys.rows.reserve(selected.size());
  for (const SafetyPair* p : selected) {
    switch (p->kind) {
      case PairKind::AgentObstacle:
        sys.rows.push_back(
            row_agent_obstacle(*p, agents[p->i], obstacles[p->j], a_desired[p->i], sys.n_agents, params));
        break;
      case PairKind::AgentAgent:
        sys.rows.push_back(row_agent_agent(*p, agents[p->i], agents[p->j], a_desired[p->i], a_desired[p->j],
                                           sys.n_agents, params));
        break;
      case PairKind::BarycenterObstacle:
        sys.rows.push_back(row_barycenter(*p, agents, obstacles[p->j], a_desired, params));
        break;
    }
  }
  return sys;
}

FeasibilityParams feasibility_params(const AgentLimits& limits, double d_min, double gamma, double u_omax,
                                     double a_omax) {
  FeasibilityParams f;
  f.gamma = gamma;
  f.u_omax = u_omax;
  f.a_omax = a_omax;
  f.beta1 = limits.r_max;
  f.beta2 = 2.0 * ((limits.u_max + u_omax) / d_min) + limits.a_max / limits.u_min;
  f.beta3 = (a_omax + limits.a_max) / limits.u_min + gamma * ((u_omax + limits.u_min) / limits.u_min);
  return f;
}

double feasibility_expression(const FeasibilityParams& f, double vartheta) {
  const double s = std::sin(vartheta);
  return 4.0 * f.beta1 * s * s - (std::sqrt(5.0) * f.beta1 + f.beta2) * s - f.beta3;
}

FeasibilityMargin feasibility_margin(const AgentLimits& limits, double d_min, double gamma, double u_omax,
                                     double a_omax, int vartheta_grid) {
  FeasibilityMargin best;
  best.params = feasibility_params(limits, d_min, gamma, u_omax, a_omax);
  best.gamma = gamma;
  best.margin = -std::numeric_limits<double>::infinity();
  const double step = (std::numbers::pi / 2) / (vartheta_grid + 1);
  for (int k = 1; k <= vartheta_grid; ++k) {
    const double t = k * step;
    const double m = feasibility_expression(best.params, t);
    if (m > best.margin) {
      best.margin = m;
      best.vartheta = t;
    }
  }
  return best;
}

FeasibilityMargin feasibility_margin_joint(const AgentLimits& limits, double d_min, double u_omax, double a_omax,
                                           double gamma_lo, double gamma_hi, int gamma_grid, int vartheta_grid) {
  FeasibilityMargin best;
  best.margin = -std::numeric_limits<double>::infinity();
  const double ratio = gamma_grid > 1 ? std::log(gamma_hi / gamma_lo) / (gamma_grid - 1) : 0.0;
  for (int g = 0; g < gamma_grid; ++g) {
    const double gamma = gamma_lo * std::exp(ratio * g);
    const FeasibilityMargin m = feasibility_margin(limits, d_min, gamma, u_omax, a_omax, vartheta_grid);
    if (m.margin > best.margin) best = m;
  }
  return best;
}

}  // namespace hcbf
