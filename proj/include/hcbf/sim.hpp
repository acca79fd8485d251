#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hcbf/constraints.hpp"
#include "hcbf/dynamics.hpp"
#include "hcbf/nominal.hpp"
#include "hcbf/qp.hpp"
#include "hcbf/scbf.hpp"

namespace hcbf {

struct ObstacleSpec {
  ObstacleScript script;
  double d_min = 10;  // same safety distance for every agent
  bool operator==(const ObstacleSpec&) const = default;
};

struct ScenarioConfig {
  std::string name;
  std::vector<AgentState> agents;
  std::vector<AgentLimits> limits;  // one per agent
  FormationSpec formation;
  double agent_d_min = 10;
  std::vector<ObstacleSpec> obstacles;
  ScbfParams scbf;
  ConstraintMode mode = ConstraintMode::PairwiseObstacle;
  NominalGains gains;
  double dt = 0.01;
  double t_end = 600;
  std::uint64_t seed = 0;
  double initial_jitter = 0;  // std-dev of seeded position noise, m
  bool safety_filter = true;  // false runs the nominal controller alone
  double safety_tolerance = 0.01;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Field-path messages for every invariant the config breaks; empty if valid.
std::vector<std::string> validate(const ScenarioConfig& config);

/// Degenerate geometry or solver failure during a run.
class SimulationAbort : public std::runtime_error {
 public:
  SimulationAbort(const std::string& what, long step, double t) : std::runtime_error(what), step(step), t(t) {}
  long step;
  double t;
};

struct World {
  long step = 0;
  double t = 0;
  std::vector<AgentState> agents;
  std::vector<ObstacleState> obstacles;
  std::vector<SafetyPair> pairs;
};

struct JumpEvent {
  long step = 0;
  double t = 0;
  int pair = 0;
  int q_before = 0;
  int q_after = 0;
  double h2_before = 0;
  double h2_after = 0;
  double delta = 0;
};

/// One controller evaluation at time t (state before integration).
struct TraceRow {
  double t = 0;
  std::vector<AgentState> agents;
  std::vector<AgentInput> desired;
  std::vector<AgentInput> filtered;
  std::vector<ObstacleState> obstacles;
  // Per barrier pair, in World::pairs order.
  std::vector<double> h0, h1, h2, headroom, delta, d_min;
  std::vector<int> q;
  QpStatus qp_status = QpStatus::Optimal;
  double slack = 0;
  std::vector<int> active_set;
  double kkt_residual = 0;
  int n_rows = 0;
  double y_b = 0;
  double sigma_sum = 0;
  double d_f = 0;
  bool encounter = false;  // a barycenter latch is active
  // Physical distances: agent-agent (i<j) then agent-obstacle, see SimTrace::distance_labels.
  std::vector<double> distances;
};

struct StepReport {
  std::vector<JumpEvent> jumps;
  int n_rows = 0;
  QpStatus solver_status = QpStatus::Optimal;
  int uncontrollable_rows = 0;  // zero regressor with a bound that demands decrease
};

struct SimTrace {
  ScenarioConfig config;
  std::vector<std::string> pair_labels;
  std::vector<std::string> distance_labels;
  std::vector<double> distance_limits;
  std::vector<TraceRow> rows;
  std::vector<JumpEvent> jumps;
  std::vector<std::string> warnings;
};

/// Initial world: jittered agents, obstacles at t = 0, all barrier pairs with
/// q(0) = argmin h2 (ties to +1).
World initial_world(const ScenarioConfig& config);

/// Labels and safety distances of the physical pairs recorded in distances.
void physical_pairs(const ScenarioConfig& config, std::vector<std::string>& labels, std::vector<double>& limits);

/// Steps 1-5 of a control cycle at world.t: refresh obstacles, update
/// latches and modes, nominal commands, constraints, QP. Fills `row`.
StepReport control(World& world, const ScenarioConfig& config, TraceRow& row);

/// Full step: control, then RK4 flow of every agent over dt with the
/// filtered inputs held.
StepReport step(World& world, const ScenarioConfig& config, TraceRow& row);

/// Runs to t_end. Deterministic for a given config.
SimTrace run(const ScenarioConfig& config);

struct PairMetrics {
  std::string label;
  double d_min = 0;
  double min_distance = 0;
  double min_margin = 0;  // min (d - d_min)
};

struct Metrics {
  std::vector<PairMetrics> pairs;
  double min_distance_ratio = 0;  // min d / d_min over all physical pairs and times
  double max_abs_y_b = 0;
  double final_sigma_sum = 0;
  std::vector<int> jump_counts;   // per barrier pair
  int max_jumps_in_window = 0;    // per pair, any 10 s window
  double max_abs_r = 0;
  double u_lo = 0;
  double u_hi = 0;
  int relaxed_steps = 0;
  double total_slack = 0;
  double max_slack = 0;
  double max_d_f = 0;
  double max_d_f_encounter = 0;
  double d_f_d = 0;
  int n_rows = 0;
  bool safe = true;  // min_distance_ratio >= 1 - safety_tolerance
};

Metrics metrics(const SimTrace& trace, double jump_window = 10.0);

}  // namespace hcbf
