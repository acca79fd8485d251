#include "testkit/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

namespace {

struct Side {
  double px = 0, py = 0, vx = 0, vy = 0;
};

Side own(const Flat& s) {
  Side o;
  const int n = s.variant == Variant::Barycenter ? s.n_agents : 1;
  for (int k = 0; k < n; ++k) {
    o.px += s.ag(k, 0);
    o.py += s.ag(k, 1);
    o.vx += s.ag(k, 3) * std::cos(s.ag(k, 2));
    o.vy += s.ag(k, 3) * std::sin(s.ag(k, 2));
  }
  o.px /= n;
  o.py /= n;
  o.vx /= n;
  o.vy /= n;
  return o;
}

Side partner(const Flat& s) {
  if (s.variant == Variant::Agents) {
    return {s.ag(1, 0), s.ag(1, 1), s.ag(1, 3) * std::cos(s.ag(1, 2)), s.ag(1, 3) * std::sin(s.ag(1, 2))};
  }
  return {s.ob(0), s.ob(1), s.ob(2), s.ob(3)};
}

// Drift vector field in flat coordinates.
std::vector<double> drift(const Flat& s) {
  std::vector<double> f(s.x.size(), 0.0);
  for (int k = 0; k < s.n_agents; ++k) {
    f[static_cast<std::size_t>(4 * k)] = s.ag(k, 3) * std::cos(s.ag(k, 2));
    f[static_cast<std::size_t>(4 * k + 1)] = s.ag(k, 3) * std::sin(s.ag(k, 2));
  }
  if (s.variant != Variant::Agents) {
    const auto o = static_cast<std::size_t>(4 * s.n_agents);
    f[o] = s.ob(2);
    f[o + 1] = s.ob(3);
    f[o + 2] = s.ob(4);
    f[o + 3] = s.ob(5);
  }
  return f;
}

template <typename F>
double richardson(F&& fn, double h) {
  auto central = [&](double step) { return (fn(step) - fn(-step)) / (2.0 * step); };
  return (4.0 * central(h / 2) - central(h)) / 3.0;
}

}  // namespace

Flat from_pair_state(const hcbf::PairState& ps) {
  Flat s;
  switch (ps.kind) {
    case hcbf::PairKind::AgentObstacle:
      s.variant = Variant::Obstacle;
      break;
    case hcbf::PairKind::AgentAgent:
      s.variant = Variant::Agents;
      break;
    case hcbf::PairKind::BarycenterObstacle:
      s.variant = Variant::Barycenter;
      break;
  }
  s.n_agents = static_cast<int>(ps.agents.size());
  for (const auto& a : ps.agents) {
    s.x.insert(s.x.end(), {a.p.x(), a.p.y(), a.psi, a.u});
  }
  if (s.variant != Variant::Agents) {
    const auto& o = ps.obstacle;
    s.x.insert(s.x.end(), {o.p.x(), o.p.y(), o.v.x(), o.v.y(), o.a.x(), o.a.y()});
  }
  return s;
}

double h0(const Flat& s, double d_min) {
  const Side a = own(s);
  const Side b = partner(s);
  const double dx = b.px - a.px;
  const double dy = b.py - a.py;
  return d_min * d_min - (dx * dx + dy * dy);
}

double h1(const Flat& s, double d_min, double gamma0) {
  const Side a = own(s);
  const Side b = partner(s);
  const double dx = b.px - a.px;
  const double dy = b.py - a.py;
  return 2.0 * (dx * (a.vx - b.vx) + dy * (a.vy - b.vy)) + gamma0 * h0(s, d_min);
}

double h2(const Flat& s, double d_min, int q, double vartheta, double gamma0) {
  const Side a = own(s);
  const Side b = partner(s);
  const double dx = b.px - a.px;
  const double dy = b.py - a.py;
  const double c = std::cos(q * vartheta);
  const double sn = std::sin(q * vartheta);
  // p^T R v = cos * (p . v) - sin * (p x v)
  const double rotated = c * (dx * a.vx + dy * a.vy) - sn * (dx * a.vy - dy * a.vx);
  const double d = std::sqrt(dx * dx + dy * dy);
  const double speed = std::sqrt(a.vx * a.vx + a.vy * a.vy);
  return 2.0 * rotated - 2.0 * (dx * b.vx + dy * b.vy) + gamma0 * h0(s, d_min) + 4.0 * d * speed * std::sin(vartheta);
}

Lie fd_lie(const Flat& s, double d_min, int q, double vartheta, double gamma0) {
  Lie out;
  auto along = [&](const std::vector<double>& dir) {
    return [&, dir](double tau) {
      Flat t = s;
      for (std::size_t k = 0; k < t.x.size(); ++k) t.x[k] += tau * dir[k];
      return h2(t, d_min, q, vartheta, gamma0);
    };
  };
  out.lf = richardson(along(drift(s)), 1e-3);
  for (int k = 0; k < s.n_agents; ++k) {
    std::vector<double> e(s.x.size(), 0.0);
    e[static_cast<std::size_t>(4 * k + 2)] = 1.0;
    out.lg_r.push_back(richardson(along(e), 1e-3));
    e[static_cast<std::size_t>(4 * k + 2)] = 0.0;
    e[static_cast<std::size_t>(4 * k + 3)] = 1.0;
    out.lg_a.push_back(richardson(along(e), 1e-3));
  }
  return out;
}

bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1.0});
}

QpOracle qp_oracle(const Eigen::VectorXd& rd, const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                   const Eigen::VectorXd& r_max, int grid_points, long max_grid_total) {
  const Eigen::Index n = rd.size();
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    if (G.row(i).norm() < 1e-14) continue;
    rows.emplace_back(G.row(i).transpose());
    rhs.push_back(b(i));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (double sign : {1.0, -1.0}) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e(i) = sign;
      rows.push_back(e);
      rhs.push_back(r_max(i));
    }
  }

  QpOracle out;
  std::vector<double> lambda(rows.size(), 0.0);
  Eigen::VectorXd r = rd;
  for (out.sweeps = 0; out.sweeps < 500000; ++out.sweeps) {
    double change = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double nn = rows[k].squaredNorm();
      const double next = std::max(0.0, lambda[k] + (rows[k].dot(r) - rhs[k]) / nn);
      const double delta = next - lambda[k];
      if (delta != 0.0) {
        r -= delta * rows[k];
        lambda[k] = next;
        change = std::max(change, std::abs(delta) * std::sqrt(nn));
      }
    }
    if (change < 1e-15) break;
  }
  out.r = r;
  out.objective = 0.5 * (r - rd).squaredNorm();

  // Grid witness over the box.
  int per_axis = grid_points;
  while (per_axis > 2 && std::pow(static_cast<double>(per_axis), static_cast<double>(n)) > max_grid_total) --per_axis;
  out.grid_objective = std::numeric_limits<double>::infinity();
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd pt(n);
  while (true) {
    for (Eigen::Index i = 0; i < n; ++i) {
      pt(i) = -r_max(i) + 2.0 * r_max(i) * idx[static_cast<std::size_t>(i)] / (per_axis - 1);
    }
    bool ok = true;
    for (Eigen::Index i = 0; i < G.rows() && ok; ++i) ok = G.row(i).dot(pt) <= b(i) + 1e-12;
    if (ok) {
      out.grid_found = true;
      out.grid_objective = std::min(out.grid_objective, 0.5 * (pt - rd).squaredNorm());
    }
    Eigen::Index k = 0;
    while (k < n && ++idx[static_cast<std::size_t>(k)] == per_axis) idx[static_cast<std::size_t>(k++)] = 0;
    if (k == n) break;
  }
  return out;
}

Audit safety_audit(const hcbf::SimTrace& trace, double tol) {
  Audit a;
  const auto& c = trace.config;
  auto check = [&](double d, double d_min) {
    a.min_ratio = std::min(a.min_ratio, d / d_min);
    if (d < (1.0 - tol) * d_min) ++a.violations;
  };
  for (const auto& row : trace.rows) {
    const auto n = row.agents.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = row.agents[j].p.x() - row.agents[i].p.x();
        const double dy = row.agents[j].p.y() - row.agents[i].p.y();
        check(std::hypot(dx, dy), c.agent_d_min);
      }
      for (std::size_t j = 0; j < row.obstacles.size(); ++j) {
        const double dx = row.obstacles[j].p.x() - row.agents[i].p.x();
        const double dy = row.obstacles[j].p.y() - row.agents[i].p.y();
        check(std::hypot(dx, dy), c.obstacles[j].d_min);
      }
      a.max_abs_r = std::max(a.max_abs_r, std::abs(row.filtered[i].r));
      a.u_lo = std::min(a.u_lo, row.agents[i].u);
      a.u_hi = std::max(a.u_hi, row.agents[i].u);
    }
  }
  return a;
}

hcbf::AgentState random_agent(std::mt19937_64& rng, double box) {
  std::uniform_real_distribution<double> pos(-box, box);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  std::uniform_real_distribution<double> speed(0.3, 0.8);
  hcbf::AgentState s;
  s.p = {pos(rng), pos(rng)};
  s.psi = hcbf::wrap_angle(ang(rng));
  s.u = speed(rng);
  return s;
}

hcbf::ObstacleState random_obstacle(std::mt19937_64& rng, double box) {
  std::uniform_real_distribution<double> pos(-box, box);
  std::uniform_real_distribution<double> vel(-0.35, 0.35);
  std::uniform_real_distribution<double> acc(-0.05, 0.05);
  hcbf::ObstacleState o;
  o.p = {pos(rng), pos(rng)};
  o.v = {vel(rng), vel(rng)};
  o.a = {acc(rng), acc(rng)};
  return o;
}

hcbf::PairState random_pair(std::mt19937_64& rng, hcbf::PairKind kind) {
  std::uniform_int_distribution<int> fleet(2, 7);
  std::uniform_real_distribution<double> dmin(5, 40);
  while (true) {
    hcbf::PairState x;
    switch (kind) {
      case hcbf::PairKind::AgentObstacle:
        x = hcbf::PairState::agent_obstacle(random_agent(rng), random_obstacle(rng), dmin(rng));
        break;
      case hcbf::PairKind::AgentAgent:
        x = hcbf::PairState::agent_agent(random_agent(rng), random_agent(rng), dmin(rng));
        break;
      case hcbf::PairKind::BarycenterObstacle: {
        std::vector<hcbf::AgentState> f;
        const int n = fleet(rng);
        for (int k = 0; k < n; ++k) f.push_back(random_agent(rng));
        x = hcbf::PairState::barycenter(f, random_obstacle(rng, 120), dmin(rng) + 40);
        if (x.own_speed() < 0.05) continue;
        break;
      }
    }
    if (x.distance() >= 1.0) return x;
  }
}

}  // namespace oracle
