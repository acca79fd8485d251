#include "hcbf/nominal.hpp"

#include <algorithm>
#include <cmath>

namespace hcbf {

bool FormationSpec::centered(double tol) const {
  Vec2d s = Vec2d::Zero();
  for (const auto& o : offsets) s += o;
  return s.norm() <= tol;
}

double TaskErrors::sigma_sum() const {
  double s = 0;
  for (const auto& e : sigma_err) s += e.norm();
  return s;
}

TaskErrors task_errors(std::span<const AgentState> states, const FormationSpec& spec) {
  TaskErrors out;
  if (states.empty()) return out;
  Vec2d p_b = Vec2d::Zero();
  for (const auto& s : states) p_b += s.p;
  p_b /= static_cast<double>(states.size());
  out.y_b = p_b.y();
  out.sigma_err.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Vec2d offset = i < spec.offsets.size() ? spec.offsets[i] : Vec2d::Zero();
    out.sigma_err.push_back(states[i].p - p_b - offset);
  }
  return out;
}

AgentInput nominal_command(const AgentState& s, double y_b, const Vec2d& sigma_err, const NominalGains& gains,
                           const AgentLimits& limits) {
  // Smooth saturation: slope -k_path near the path, magnitude k_path * lookahead far away.
  const double cross = -gains.k_path * y_b * gains.lookahead / std::hypot(gains.lookahead, y_b);
  const Vec2d v_des = Vec2d(gains.u_ref, cross) - gains.k_form * sigma_err;

  AgentInput in;
  const double psi_des = std::atan2(v_des.y(), v_des.x());
  in.r = std::clamp(gains.k_psi * wrap_angle(psi_des - s.psi), -limits.r_max, limits.r_max);
  const double u_des = std::clamp(v_des.norm(), limits.u_min, limits.u_max);
  in.a = std::clamp(gains.k_u * (u_des - s.u), -limits.a_max, limits.a_max);
  return in;
}

}  // namespace hcbf
