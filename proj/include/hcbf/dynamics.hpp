#pragma once

#include <vector>

#include <Eigen/Dense>

#include "hcbf/core_math.hpp"

namespace hcbf {

/// Planar unicycle state with forward speed.
template <typename Scalar>
struct AgentStateT {
  Vec2<Scalar> p = Vec2<Scalar>::Zero();
  Scalar psi = 0;  // kept in (-pi, pi]
  Scalar u = 0;

  Vec2<Scalar> velocity() const { return u * heading(psi); }
  bool operator==(const AgentStateT&) const = default;
};

using AgentState = AgentStateT<double>;

struct AgentInput {
  double r = 0;  // heading rate, rad/s
  double a = 0;  // acceleration, m/s^2
  bool operator==(const AgentInput&) const = default;
};

struct AgentLimits {
  double r_max = 0.5;
  double a_max = 0.25;
  double u_min = 0.3;
  double u_max = 0.8;

  bool valid() const { return r_max > 0 && a_max >= 0 && u_min > 0 && u_max >= u_min; }
  bool operator==(const AgentLimits&) const = default;
};

struct ObstacleState {
  Vec2d p = Vec2d::Zero();
  Vec2d v = Vec2d::Zero();
  Vec2d a = Vec2d::Zero();
};

/// Piecewise-constant velocity script. Segment k is active on
/// [segments[k].t_start, segments[k+1].t_start).
struct ObstacleScript {
  struct Segment {
    double t_start = 0;
    Vec2d velocity = Vec2d::Zero();
    bool operator==(const Segment&) const = default;
  };

  Vec2d p0 = Vec2d::Zero();
  std::vector<Segment> segments;

  static ObstacleScript constant_velocity(const Vec2d& p0, const Vec2d& v);

  double start_time() const { return segments.empty() ? 0.0 : segments.front().t_start; }
  /// Largest speed over all segments.
  double max_speed() const;
  bool operator==(const ObstacleScript&) const = default;
};

/// Time derivative (x', y', psi', u') of the unicycle model.
Eigen::Vector4d agent_derivative(const AgentState& s, const AgentInput& in);

/// One classical RK4 step with the input held constant. psi is re-wrapped and
/// u clamped to [u_min, u_max] afterwards.
AgentState step_agent(const AgentState& s, const AgentInput& in, double dt, const AgentLimits& lim);

/// Exact evaluation of a script at time t. Segment switches report a = 0.
ObstacleState obstacle_at(const ObstacleScript& script, double t);

}  // namespace hcbf
