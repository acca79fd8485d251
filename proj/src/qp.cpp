#include "hcbf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hcbf {

namespace {

constexpr double kFeasTol = 1e-11;     // on unit-normalised rows
constexpr double kPrimalTol = 1e-8;    // accepted primal violation on unit rows
constexpr double kZeroDirection = 1e-12;
constexpr double kZeroRow = 1e-14;

// Rows n_k^T x <= c_k with |n_k| = 1, tagged with their external index.
struct NormalizedRows {
  Eigen::MatrixXd n;
  Eigen::VectorXd c;
  Eigen::VectorXd scale;  // |g_k| of the original row
  std::vector<int> origin;
  bool trivially_infeasible = false;
};

NormalizedRows normalize(const Eigen::MatrixXd& G, const Eigen::VectorXd& b, double slack,
                         const Eigen::VectorXd& r_max) {
  const Eigen::Index m = G.rows();
  const Eigen::Index dim = r_max.size();
  NormalizedRows out;
  out.n.resize(m + 2 * dim, dim);
  out.c.resize(m + 2 * dim);
  out.scale.resize(m + 2 * dim);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double norm = G.row(i).norm();
    const double bound = b(i) + slack;
    if (norm < kZeroRow) {
      // 0 <= bound must hold on its own.
      if (bound < -kFeasTol) out.trivially_infeasible = true;
      continue;
    }
    out.n.row(k) = G.row(i) / norm;
    out.c(k) = bound / norm;
    out.scale(k) = norm;
    out.origin.push_back(static_cast<int>(i));
    ++k;
  }
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (int sign : {+1, -1}) {
      out.n.row(k).setZero();
      out.n(k, i) = sign;
      out.c(k) = r_max(i);
      out.scale(k) = 1.0;
      out.origin.push_back(static_cast<int>(m + 2 * i + (sign > 0 ? 0 : 1)));
      ++k;
    }
  }
  out.n.conservativeResize(k, dim);
  out.c.conservativeResize(k);
  out.scale.conservativeResize(k);
  return out;
}

struct DualResult {
  bool feasible = false;
  Eigen::VectorXd x;
  std::vector<Eigen::Index> active;
  std::vector<double> u;
  int iterations = 0;
};

// Dual active-set method for  min 1/2|x - x0|^2  s.t.  n x <= c  (unit rows).
// Starts from the unconstrained minimiser and adds the most violated row,
// keeping stationarity x - x0 + sum u_k n_k = 0 with u >= 0 throughout.
DualResult dual_active_set(const Eigen::VectorXd& x0, const NormalizedRows& rows) {
  DualResult res;
  res.x = x0;
  if (rows.trivially_infeasible) return res;

  const Eigen::Index m = rows.n.rows();
  const Eigen::Index dim = x0.size();
  const int max_iter = static_cast<int>(20 * (m + dim) + 100);
  std::vector<char> in_active(static_cast<std::size_t>(m), 0);

  auto drop = [&](std::size_t pos) {
    in_active[static_cast<std::size_t>(res.active[pos])] = 0;
    res.active.erase(res.active.begin() + static_cast<std::ptrdiff_t>(pos));
    res.u.erase(res.u.begin() + static_cast<std::ptrdiff_t>(pos));
  };

  while (res.iterations < max_iter) {
    // Most violated inactive row.
    Eigen::Index p = -1;
    double worst = kFeasTol;
    for (Eigen::Index k = 0; k < m; ++k) {
      if (in_active[static_cast<std::size_t>(k)]) continue;
      const double v = rows.n.row(k).dot(res.x) - rows.c(k);
      if (v > worst) {
        worst = v;
        p = k;
      }
    }
    if (p < 0) {
      res.feasible = true;
      return res;
    }

    double u_p = 0;
    const Eigen::VectorXd np = rows.n.row(p).transpose();
    for (;;) {
      ++res.iterations;
      if (res.iterations >= max_iter) return res;

      const auto na = static_cast<Eigen::Index>(res.active.size());
      Eigen::VectorXd r = Eigen::VectorXd::Zero(na);
      Eigen::VectorXd z = -np;
      if (na > 0) {
        Eigen::MatrixXd N(dim, na);
        for (Eigen::Index j = 0; j < na; ++j) N.col(j) = rows.n.row(res.active[static_cast<std::size_t>(j)]).transpose();
        r = N.colPivHouseholderQr().solve(np);
        z = -(np - N * r);
      }

      double t1 = std::numeric_limits<double>::infinity();
      std::size_t block = 0;
      for (Eigen::Index j = 0; j < na; ++j) {
        if (r(j) > 0) {
          const double t = res.u[static_cast<std::size_t>(j)] / r(j);
          if (t < t1) {
            t1 = t;
            block = static_cast<std::size_t>(j);
          }
        }
      }
      const double zz = z.squaredNorm();
      const double violation = np.dot(res.x) - rows.c(p);
      const double t2 = zz > kZeroDirection * kZeroDirection ? violation / zz
                                                             : std::numeric_limits<double>::infinity();
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) return res;  // infeasible

      if (std::isfinite(t2)) res.x += t * z;
      for (Eigen::Index j = 0; j < na; ++j) res.u[static_cast<std::size_t>(j)] -= t * r(j);
      u_p += t;

      if (t2 <= t1) {
        res.active.push_back(p);
        res.u.push_back(u_p);
        in_active[static_cast<std::size_t>(p)] = 1;
        break;
      }
      res.u[block] = 0;
      drop(block);
    }
  }
  return res;
}

double kkt_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& x0, const NormalizedRows& rows,
                    const DualResult& d) {
  Eigen::VectorXd grad = x - x0;
  double res = 0;
  for (std::size_t j = 0; j < d.active.size(); ++j) {
    grad += d.u[j] * rows.n.row(d.active[j]).transpose();
    res = std::max(res, -d.u[j]);
    res = std::max(res, std::abs(d.u[j] * (rows.n.row(d.active[j]).dot(x) - rows.c(d.active[j]))));
  }
  res = std::max(res, grad.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < rows.n.rows(); ++k) {
    res = std::max(res, rows.n.row(k).dot(x) - rows.c(k));
  }
  return res;
}

QpSolution package(const DualResult& d, const QpProblem& p, const NormalizedRows& rows) {
  QpSolution sol;
  sol.r = d.x;
  sol.iterations = d.iterations;
  sol.slack_used = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.system.rows.size()));
  if (!d.feasible) {
    sol.status = QpStatus::Infeasible;
    sol.message = "no point satisfies the barrier rows inside the actuator box";
    return sol;
  }
  // Guard against a degenerate polytope fooling the dual method.
  const double violation = (rows.n * d.x - rows.c).maxCoeff();
  if (rows.c.size() > 0 && violation > kPrimalTol) {
    sol.status = QpStatus::Infeasible;
    sol.message = "dual iteration ended outside the feasible set";
    return sol;
  }
  sol.r = d.x.cwiseMax(-p.system.r_max).cwiseMin(p.system.r_max);
  sol.status = QpStatus::Optimal;
  std::vector<std::size_t> order(d.active.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows.origin[static_cast<std::size_t>(d.active[a])] < rows.origin[static_cast<std::size_t>(d.active[b])];
  });
  for (std::size_t j : order) {
    const auto k = static_cast<std::size_t>(d.active[j]);
    sol.active_set.push_back(rows.origin[k]);
    sol.multipliers.push_back(d.u[j] / rows.scale(static_cast<Eigen::Index>(k)));
  }
  sol.kkt_residual = kkt_residual(d.x, p.r_desired, rows, d);
  return sol;
}

bool dimensions_ok(const QpProblem& p) {
  const Eigen::Index n = p.r_desired.size();
  if (p.system.r_max.size() != n || p.system.n_agents != n) return false;
  if ((p.system.r_max.array() <= 0).any()) return false;
  for (const auto& row : p.system.rows) {
    if (row.coefficients.size() != n) return false;
  }
  return true;
}

QpSolution error(const char* msg) {
  QpSolution sol;
  sol.status = QpStatus::Error;
  sol.message = msg;
  return sol;
}

}  // namespace

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal:
      return "optimal";
    case QpStatus::Infeasible:
      return "infeasible";
    case QpStatus::InfeasibleRelaxed:
      return "infeasible-relaxed";
    case QpStatus::Error:
      return "error";
  }
  return "unknown";
}

QpProblem QpProblem::from_matrices(const Eigen::VectorXd& r_desired, const Eigen::MatrixXd& G,
                                   const Eigen::VectorXd& b, const Eigen::VectorXd& r_max) {
  QpProblem p;
  p.r_desired = r_desired;
  p.system.n_agents = static_cast<int>(r_desired.size());
  p.system.r_max = r_max;
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    ConstraintRow row;
    row.coefficients = G.row(i).transpose();
    row.bound = b(i);
    row.active_hint = row.coefficients.size() > 0 && row.coefficients.cwiseAbs().maxCoeff() > kCoefficientFloor;
    p.system.rows.push_back(std::move(row));
  }
  return p;
}

QpSolution solve(const QpProblem& p) {
  if (!dimensions_ok(p)) return error("dimension mismatch or empty box");
  const NormalizedRows rows = normalize(p.system.G(), p.system.b(), 0.0, p.system.r_max);
  return package(dual_active_set(p.r_desired, rows), p, rows);
}

QpSolution relax(const QpProblem& p) {
  if (!dimensions_ok(p)) return error("dimension mismatch or empty box");
  const Eigen::MatrixXd G = p.system.G();
  const Eigen::VectorXd b = p.system.b();

  auto attempt = [&](double s) {
    const NormalizedRows rows = normalize(G, b, s, p.system.r_max);
    return std::pair{dual_active_set(p.r_desired, rows), rows};
  };

  {
    auto [d, rows] = attempt(0.0);
    if (d.feasible) return package(d, p, rows);
  }

  // r = 0 lies in the box, so s = max(-b) is always feasible.
  double lo = 0.0;
  double hi = b.size() > 0 ? std::max(0.0, (-b).maxCoeff()) : 0.0;
  hi = hi * (1.0 + 1e-12) + 1e-12;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (attempt(mid).first.feasible) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  // Solve a hair inside the bisection bound so the polytope is not a single point.
  hi += 1e-9 * (1.0 + hi);
  auto [d, rows] = attempt(hi);
  QpSolution sol = package(d, p, rows);
  if (sol.status != QpStatus::Optimal) return error("relaxation failed");
  sol.status = QpStatus::InfeasibleRelaxed;
  sol.slack = hi;
  sol.slack_used = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p.system.rows.size()), hi);
  sol.message = "barrier rows relaxed by a uniform slack";
  return sol;
}

QpSolution solve_or_relax(const QpProblem& p) {
  QpSolution sol = solve(p);
  if (sol.status == QpStatus::Infeasible) return relax(p);
  return sol;
}

}  // namespace hcbf
