#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcbf/constraints.hpp"

namespace hcbf {

/// minimize 1/2 |r - r_desired|^2  s.t.  G r <= b,  |r_k| <= r_max(k).
struct QpProblem {
  Eigen::VectorXd r_desired;
  ConstraintSystem system;

  static QpProblem from_matrices(const Eigen::VectorXd& r_desired, const Eigen::MatrixXd& G,
                                 const Eigen::VectorXd& b, const Eigen::VectorXd& r_max);
};

enum class QpStatus { Optimal, Infeasible, InfeasibleRelaxed, Error };

const char* to_string(QpStatus status);

struct QpSolution {
  Eigen::VectorXd r;
  QpStatus status = QpStatus::Error;
  /// Active rows. Barrier rows keep their index; the box row r_k <= r_max
  /// is reported as m + 2k and -r_k <= r_max as m + 2k + 1.
  std::vector<int> active_set;
  /// Multipliers in the same indexing as active_set.
  std::vector<double> multipliers;
  double kkt_residual = 0;
  /// Uniform slack added to every barrier row (0 unless relaxed).
  double slack = 0;
  Eigen::VectorXd slack_used;
  int iterations = 0;
  std::string message;
};

/// Dual active-set solve. Reports Infeasible when no point satisfies the rows
/// inside the box; never relaxes on its own.
QpSolution solve(const QpProblem& p);

/// Minimal uniform slack s >= 0 with G r <= b + s feasible inside the box,
/// then the min-norm point for that s. Box bounds are never relaxed.
QpSolution relax(const QpProblem& p);

/// solve(), falling back to relax() on infeasibility.
QpSolution solve_or_relax(const QpProblem& p);

}  // namespace hcbf
