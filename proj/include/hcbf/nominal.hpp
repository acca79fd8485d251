#pragma once

#include <span>
#include <vector>

#include "hcbf/dynamics.hpp"

namespace hcbf {

/// Desired formation: offsets p_i^f relative to the barycenter, path = x-axis.
struct FormationSpec {
  std::vector<Vec2d> offsets;

  /// Offsets must sum to zero.
  bool centered(double tol = 1e-9) const;
  bool operator==(const FormationSpec&) const = default;
};

struct NominalGains {
  double k_path = 0.05;   // 1/s, cross-track
  double k_form = 0.05;   // 1/s, formation slot
  double k_psi = 1.0;     // 1/s, heading
  double k_u = 0.5;       // 1/s, speed
  double u_ref = 0.5;     // m/s, cruise speed
  double lookahead = 8.0; // m, cross-track saturation length
  bool operator==(const NominalGains&) const = default;
};

struct TaskErrors {
  double y_b = 0;
  std::vector<Vec2d> sigma_err;  // (p_i - p_b) - p_i^f

  double sigma_sum() const;
};

TaskErrors task_errors(std::span<const AgentState> states, const FormationSpec& spec);

/// Saturated line-of-sight path term plus proportional slot tracking.
///   v_des = u_ref x + sat(-k_path y_b) y - k_form sigma_err_i
///   r_d = clamp(k_psi wrap(atan2(v_des) - psi), r_max)
///   a_d = clamp(k_u (clamp(|v_des|, u_min, u_max) - u), a_max)
AgentInput nominal_command(const AgentState& s, double y_b, const Vec2d& sigma_err, const NominalGains& gains,
                           const AgentLimits& limits);

}  // namespace hcbf
