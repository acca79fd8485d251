#include "hcbf/dynamics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace hcbf {

ObstacleScript ObstacleScript::constant_velocity(const Vec2d& p0, const Vec2d& v) {
  ObstacleScript s;
  s.p0 = p0;
  s.segments.push_back({0.0, v});
  return s;
}

double ObstacleScript::max_speed() const {
  double m = 0;
  for (const auto& seg : segments) m = std::max(m, seg.velocity.norm());
  return m;
}

Eigen::Vector4d agent_derivative(const AgentState& s, const AgentInput& in) {
  return {s.u * std::cos(s.psi), s.u * std::sin(s.psi), in.r, in.a};
}

AgentState step_agent(const AgentState& s, const AgentInput& in, double dt, const AgentLimits& lim) {
  const Eigen::Vector4d x0(s.p.x(), s.p.y(), s.psi, s.u);
  auto f = [&](const Eigen::Vector4d& x) {
    AgentState tmp;
    tmp.p = x.head<2>();
    tmp.psi = x(2);
    tmp.u = x(3);
    return agent_derivative(tmp, in);
  };
  const Eigen::Vector4d k1 = f(x0);
  const Eigen::Vector4d k2 = f(x0 + 0.5 * dt * k1);
  const Eigen::Vector4d k3 = f(x0 + 0.5 * dt * k2);
  const Eigen::Vector4d k4 = f(x0 + dt * k3);
  const Eigen::Vector4d x1 = x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  AgentState out;
  out.p = x1.head<2>();
  out.psi = wrap_angle(x1(2));
  out.u = std::clamp(x1(3), lim.u_min, lim.u_max);
  return out;
}

ObstacleState obstacle_at(const ObstacleScript& script, double t) {
  if (script.segments.empty()) {
    throw std::invalid_argument("obstacle_at: script has no segments");
  }
  if (t < script.start_time()) {
    throw std::invalid_argument("obstacle_at: t precedes script start");
  }
  ObstacleState out;
  out.p = script.p0;
  const auto& segs = script.segments;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const double t0 = segs[k].t_start;
    const double t_end = k + 1 < segs.size() ? segs[k + 1].t_start : std::numeric_limits<double>::infinity();
    if (t < t_end) {
      out.p += (t - t0) * segs[k].velocity;
      out.v = segs[k].velocity;
      break;
    }
    out.p += (t_end - t0) * segs[k].velocity;
  }
  out.a.setZero();
  return out;
}

}  // namespace hcbf
