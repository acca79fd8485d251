#include "hcbf/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace hcbf {

namespace {

std::string agent_label(int i) { return "a" + std::to_string(i + 1); }

std::string pair_label(const SafetyPair& p, int n_agents) {
  switch (p.kind) {
    case PairKind::AgentObstacle:
      return agent_label(p.i) + "_o" + std::to_string(n_agents + p.j + 1);
    case PairKind::AgentAgent:
      return agent_label(p.i) + "_" + agent_label(p.j);
    case PairKind::BarycenterObstacle:
      return "b_o" + std::to_string(n_agents + p.j + 1);
  }
  return "?";
}

std::vector<double> agent_dmins_for(const ScenarioConfig& c, int j) {
  return std::vector<double>(c.agents.size(), c.obstacles[static_cast<std::size_t>(j)].d_min);
}

void update_latches(World& w, const ScenarioConfig& c) {
  for (auto& pair : w.pairs) {
    if (pair.kind != PairKind::BarycenterObstacle) continue;
    const std::vector<double> dmins = agent_dmins_for(c, pair.j);
    const BarycenterGeometry g = barycenter_geometry(w.agents, c.formation.offsets, dmins);
    const double d_bj = (w.obstacles[static_cast<std::size_t>(pair.j)].p - g.p_b).norm();
    pair = latch_d_bj_min(pair, g.d_bj_min_raw, d_bj);
  }
}

std::string snapshot(const World& w) {
  std::ostringstream os;
  os.precision(17);
  os << "t=" << w.t << " agents:";
  for (const auto& a : w.agents) os << " (" << a.p.x() << ", " << a.p.y() << ", " << a.psi << ", " << a.u << ")";
  os << " obstacles:";
  for (const auto& o : w.obstacles) os << " (" << o.p.x() << ", " << o.p.y() << ")";
  return os.str();
}

}  // namespace

std::vector<std::string> validate(const ScenarioConfig& c) {
  std::vector<std::string> errs;
  auto err = [&](const std::string& path, const std::string& msg) { errs.push_back(path + ": " + msg); };
  if (c.agents.empty()) err("agents", "at least one agent is required");
  if (c.limits.size() != c.agents.size()) err("agents", "one limits block per agent is required");
  for (std::size_t i = 0; i < c.limits.size(); ++i) {
    const AgentLimits& l = c.limits[i];
    const std::string base = "agents[" + std::to_string(i) + "].limits";
    if (!(l.r_max > 0)) err(base + ".r_max", "must be positive");
    if (!(l.a_max >= 0)) err(base + ".a_max", "must be nonnegative");
    if (!(l.u_min > 0)) err(base + ".u_min", "must be positive (agents keep strictly positive speed)");
    if (!(l.u_max >= l.u_min)) err(base + ".u_max", "must be >= u_min");
    if (i < c.agents.size()) {
      const double u = c.agents[i].u;
      if (!(u >= l.u_min && u <= l.u_max)) {
        err("agents[" + std::to_string(i) + "].u", "initial speed must lie in [u_min, u_max]");
      }
    }
  }
  if (c.formation.offsets.size() != c.agents.size()) err("agents", "every agent needs a formation offset");
  if (!c.formation.centered(1e-6)) err("formation", "offsets must sum to zero");
  if (!(c.agent_d_min > 0)) err("agent_d_min", "must be positive");
  for (std::size_t j = 0; j < c.obstacles.size(); ++j) {
    const std::string base = "obstacles[" + std::to_string(j) + "]";
    const ObstacleSpec& o = c.obstacles[j];
    if (!(o.d_min > 0)) err(base + ".d_min", "must be positive");
    if (o.script.segments.empty()) err(base + ".segments", "at least one segment is required");
    for (std::size_t k = 0; k < o.script.segments.size(); ++k) {
      if (k > 0 && !(o.script.segments[k].t_start > o.script.segments[k - 1].t_start)) {
        err(base + ".segments[" + std::to_string(k) + "].t_start", "segments must be strictly time-ordered");
      }
    }
    if (!o.script.segments.empty() && o.script.segments.front().t_start > 0) {
      err(base + ".segments[0].t_start", "script must start at t = 0");
    }
  }
  const ScbfParams& s = c.scbf;
  if (!(s.vartheta > 0 && s.vartheta < std::numbers::pi / 2)) err("scbf.vartheta", "must lie in (0, pi/2)");
  if (!(s.gamma0 > 0)) err("scbf.gamma0", "must be positive");
  if (!(s.gamma2 > 0)) err("scbf.gamma2", "must be positive");
  if (!(s.excluded_ball > 0)) err("scbf.excluded_ball", "must be positive");
  if (s.hysteresis.kind == HysteresisKind::Constant && !(s.hysteresis.value > 0)) {
    err("scbf.hysteresis.value", "constant width must be positive");
  }
  const NominalGains& g = c.gains;
  if (!(g.k_path > 0)) err("gains.k_path", "must be positive");
  if (!(g.k_form > 0)) err("gains.k_form", "must be positive");
  if (!(g.k_psi > 0)) err("gains.k_psi", "must be positive");
  if (!(g.k_u > 0)) err("gains.k_u", "must be positive");
  if (!(g.lookahead > 0)) err("gains.lookahead", "must be positive");
  for (std::size_t i = 0; i < c.limits.size(); ++i) {
    if (!(g.u_ref > c.limits[i].u_min && g.u_ref < c.limits[i].u_max)) {
      err("gains.u_ref", "must lie strictly inside every agent's speed box");
      break;
    }
  }
  if (!(c.dt > 0)) err("dt", "must be positive");
  if (!(c.t_end >= 0)) err("t_end", "must be nonnegative");
  if (!(c.initial_jitter >= 0)) err("initial_jitter", "must be nonnegative");
  if (!(c.safety_tolerance >= 0 && c.safety_tolerance < 1)) err("safety_tolerance", "must lie in [0, 1)");
  return errs;
}

void physical_pairs(const ScenarioConfig& c, std::vector<std::string>& labels, std::vector<double>& limits) {
  labels.clear();
  limits.clear();
  const int n = static_cast<int>(c.agents.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      labels.push_back(agent_label(i) + "_" + agent_label(j));
      limits.push_back(c.agent_d_min);
    }
  }
  for (int i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c.obstacles.size(); ++j) {
      labels.push_back(agent_label(i) + "_o" + std::to_string(n + static_cast<int>(j) + 1));
      limits.push_back(c.obstacles[j].d_min);
    }
  }
}

World initial_world(const ScenarioConfig& c) {
  World w;
  w.agents = c.agents;
  if (c.initial_jitter > 0) {
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> noise(0.0, c.initial_jitter);
    for (auto& a : w.agents) {
      a.p.x() += noise(rng);
      a.p.y() += noise(rng);
    }
  }
  for (auto& a : w.agents) a.psi = wrap_angle(a.psi);
  for (const auto& o : c.obstacles) w.obstacles.push_back(obstacle_at(o.script, 0.0));

  const int n = static_cast<int>(c.agents.size());
  const int n_o = static_cast<int>(c.obstacles.size());
  if (mode_includes(c.mode, PairKind::AgentObstacle)) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n_o; ++j) {
        SafetyPair p;
        p.kind = PairKind::AgentObstacle;
        p.i = i;
        p.j = j;
        p.d_min = c.obstacles[static_cast<std::size_t>(j)].d_min;
        w.pairs.push_back(p);
      }
    }
  }
  if (mode_includes(c.mode, PairKind::BarycenterObstacle)) {
    for (int j = 0; j < n_o; ++j) {
      SafetyPair p;
      p.kind = PairKind::BarycenterObstacle;
      p.i = -1;
      p.j = j;
      w.pairs.push_back(p);
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      SafetyPair p;
      p.kind = PairKind::AgentAgent;
      p.i = i;
      p.j = j;
      p.d_min = c.agent_d_min;
      w.pairs.push_back(p);
    }
  }
  update_latches(w, c);
  if (c.safety_filter) {
    for (auto& p : w.pairs) p.q = initial_mode(make_pair_state(p, w.agents, w.obstacles), c.scbf);
  }
  return w;
}

StepReport control(World& w, const ScenarioConfig& c, TraceRow& row) {
  StepReport report;
  const std::size_t n = w.agents.size();

  // (1) obstacles
  for (std::size_t j = 0; j < c.obstacles.size(); ++j) w.obstacles[j] = obstacle_at(c.obstacles[j].script, w.t);

  // (2) latches, then at most one jump per pair
  update_latches(w, c);
  row.h0.resize(w.pairs.size());
  row.h1.resize(w.pairs.size());
  row.h2.resize(w.pairs.size());
  row.headroom.resize(w.pairs.size());
  row.delta.resize(w.pairs.size());
  row.d_min.resize(w.pairs.size());
  row.q.resize(w.pairs.size());
  row.encounter = false;
  for (std::size_t k = 0; k < w.pairs.size(); ++k) {
    SafetyPair& pair = w.pairs[k];
    const PairState x = make_pair_state(pair, w.agents, w.obstacles);
    if (c.safety_filter) {
      const JumpOutcome j = jump_update(pair, x, c.scbf);
      if (j.jumped) {
        report.jumps.push_back({w.step, w.t, static_cast<int>(k), pair.q, j.pair.q, j.h2_before, j.h2_after, j.delta});
      }
      pair = j.pair;
    }
    try {
      const BarrierEval e = evaluate(x, pair.q, c.scbf);
      row.h0[k] = e.h0;
      row.h1[k] = e.h1;
      row.h2[k] = e.h2;
      row.headroom[k] = e.h2 - min_mode(x, pair.q, c.scbf).m2;
      row.delta[k] = hysteresis_width(x, c.scbf);
    } catch (const DegenerateGeometry&) {
      // Without the filter barriers are only diagnostics.
      if (c.safety_filter) throw;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.h0[k] = row.h1[k] = row.h2[k] = row.headroom[k] = row.delta[k] = nan;
    }
    row.d_min[k] = pair.kind == PairKind::BarycenterObstacle ? pair.d_min_latch : pair.d_min;
    row.q[k] = pair.q;
    if (pair.kind == PairKind::BarycenterObstacle && pair.latch_active) row.encounter = true;
  }

  // (3) nominal commands
  const TaskErrors errs = task_errors(w.agents, c.formation);
  row.desired.resize(n);
  std::vector<double> a_desired(n);
  Eigen::VectorXd r_desired(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    row.desired[i] = nominal_command(w.agents[i], errs.y_b, errs.sigma_err[i], c.gains, c.limits[i]);
    a_desired[i] = row.desired[i].a;
    r_desired(static_cast<Eigen::Index>(i)) = row.desired[i].r;
  }

  // (4)-(5) constraints and QP
  row.filtered = row.desired;
  row.active_set.clear();
  row.slack = 0;
  row.kkt_residual = 0;
  row.qp_status = QpStatus::Optimal;
  row.n_rows = 0;
  if (c.safety_filter) {
    QpProblem qp;
    qp.r_desired = r_desired;
    qp.system = assemble(w.pairs, w.agents, w.obstacles, a_desired, c.limits, c.scbf, c.mode);
    for (const auto& r : qp.system.rows) {
      if (!r.active_hint && r.bound < 0) ++report.uncontrollable_rows;
    }
    const QpSolution sol = solve_or_relax(qp);
    if (sol.status == QpStatus::Error) {
      throw SimulationAbort("QP solver error: " + sol.message + " at " + snapshot(w), w.step, w.t);
    }
    for (std::size_t i = 0; i < n; ++i) row.filtered[i].r = sol.r(static_cast<Eigen::Index>(i));
    row.qp_status = sol.status;
    row.slack = sol.slack;
    row.active_set = sol.active_set;
    row.kkt_residual = sol.kkt_residual;
    row.n_rows = static_cast<int>(qp.system.rows.size());
  }
  report.n_rows = row.n_rows;
  report.solver_status = row.qp_status;

  // record
  row.t = w.t;
  row.agents = w.agents;
  row.obstacles = w.obstacles;
  row.y_b = errs.y_b;
  row.sigma_sum = errs.sigma_sum();
  {
    const std::vector<double> none;
    row.d_f = barycenter_geometry(w.agents, c.formation.offsets, none).d_f;
  }
  row.distances.clear();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) row.distances.push_back((w.agents[j].p - w.agents[i].p).norm());
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& o : w.obstacles) row.distances.push_back((o.p - w.agents[i].p).norm());
  }
  return report;
}

StepReport step(World& w, const ScenarioConfig& c, TraceRow& row) {
  StepReport report;
  try {
    report = control(w, c, row);
  } catch (const DegenerateGeometry& e) {
    throw SimulationAbort(std::string("degenerate geometry: ") + e.what() + " at " + snapshot(w), w.step, w.t);
  }
  for (std::size_t i = 0; i < w.agents.size(); ++i) {
    w.agents[i] = step_agent(w.agents[i], row.filtered[i], c.dt, c.limits[i]);
  }
  ++w.step;
  w.t = static_cast<double>(w.step) * c.dt;
  return report;
}

SimTrace run(const ScenarioConfig& c) {
  SimTrace trace;
  trace.config = c;
  physical_pairs(c, trace.distance_labels, trace.distance_limits);

  World w;
  try {
    w = initial_world(c);
  } catch (const DegenerateGeometry& e) {
    throw SimulationAbort(std::string("degenerate initial geometry: ") + e.what(), 0, 0.0);
  }
  for (const auto& p : w.pairs) trace.pair_labels.push_back(pair_label(p, static_cast<int>(c.agents.size())));

  const long n_steps = std::lround(c.t_end / c.dt);
  trace.rows.reserve(static_cast<std::size_t>(n_steps + 1));
  for (long k = 0; k <= n_steps; ++k) {
    TraceRow row;
    StepReport rep;
    if (k < n_steps) {
      rep = step(w, c, row);
    } else {
      try {
        rep = control(w, c, row);
      } catch (const DegenerateGeometry& e) {
        throw SimulationAbort(std::string("degenerate geometry: ") + e.what(), w.step, w.t);
      }
    }
    trace.jumps.insert(trace.jumps.end(), rep.jumps.begin(), rep.jumps.end());
    if (rep.uncontrollable_rows > 0) {
      std::ostringstream os;
      os << "t=" << row.t << ": " << rep.uncontrollable_rows
         << " row(s) with vanishing heading-rate regressor and a decrease requirement";
      trace.warnings.push_back(os.str());
    }
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

Metrics metrics(const SimTrace& trace, double jump_window) {
  Metrics m;
  const auto& c = trace.config;
  m.pairs.resize(trace.distance_labels.size());
  for (std::size_t k = 0; k < m.pairs.size(); ++k) {
    m.pairs[k].label = trace.distance_labels[k];
    m.pairs[k].d_min = trace.distance_limits[k];
    m.pairs[k].min_distance = std::numeric_limits<double>::infinity();
  }
  m.min_distance_ratio = std::numeric_limits<double>::infinity();
  m.u_lo = std::numeric_limits<double>::infinity();
  m.u_hi = -std::numeric_limits<double>::infinity();
  for (const auto& o : c.formation.offsets) m.d_f_d = std::max(m.d_f_d, o.norm());
  m.n_rows = static_cast<int>(trace.rows.size());

  for (const auto& row : trace.rows) {
    for (std::size_t k = 0; k < row.distances.size(); ++k) {
      auto& pm = m.pairs[k];
      pm.min_distance = std::min(pm.min_distance, row.distances[k]);
      m.min_distance_ratio = std::min(m.min_distance_ratio, row.distances[k] / pm.d_min);
    }
    m.max_abs_y_b = std::max(m.max_abs_y_b, std::abs(row.y_b));
    for (const auto& in : row.filtered) m.max_abs_r = std::max(m.max_abs_r, std::abs(in.r));
    for (const auto& a : row.agents) {
      m.u_lo = std::min(m.u_lo, a.u);
      m.u_hi = std::max(m.u_hi, a.u);
    }
    if (row.qp_status == QpStatus::InfeasibleRelaxed) {
      ++m.relaxed_steps;
      m.total_slack += row.slack;
      m.max_slack = std::max(m.max_slack, row.slack);
    }
    m.max_d_f = std::max(m.max_d_f, row.d_f);
    if (row.encounter) m.max_d_f_encounter = std::max(m.max_d_f_encounter, row.d_f);
  }
  for (auto& pm : m.pairs) pm.min_margin = pm.min_distance - pm.d_min;
  if (!trace.rows.empty()) m.final_sigma_sum = trace.rows.back().sigma_sum;
  if (trace.rows.empty()) m.min_distance_ratio = 1.0;
  if (m.pairs.empty()) m.min_distance_ratio = 1.0;

  m.jump_counts.assign(trace.pair_labels.size(), 0);
  std::vector<std::deque<double>> recent(trace.pair_labels.size());
  for (const auto& j : trace.jumps) {
    const auto k = static_cast<std::size_t>(j.pair);
    ++m.jump_counts[k];
    auto& q = recent[k];
    q.push_back(j.t);
    while (!q.empty() && q.front() <= j.t - jump_window) q.pop_front();
    m.max_jumps_in_window = std::max(m.max_jumps_in_window, static_cast<int>(q.size()));
  }
  m.safe = m.min_distance_ratio >= 1.0 - c.safety_tolerance;
  return m;
}

}  // namespace hcbf
