#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hcbf/constraints.hpp"
#include "testkit/oracles.hpp"

using namespace hcbf;
using std::numbers::pi;

namespace {

AgentState agent(double x, double y, double psi, double u) {
  AgentState s;
  s.p = {x, y};
  s.psi = psi;
  s.u = u;
  return s;
}

ObstacleState obstacle(double x, double y, double vx, double vy) {
  ObstacleState o;
  o.p = {x, y};
  o.v = {vx, vy};
  return o;
}

SafetyPair pair(PairKind kind, int i, int j, double d_min, int q = 1) {
  SafetyPair p;
  p.kind = kind;
  p.i = i;
  p.j = j;
  p.d_min = d_min;
  p.d_min_latch = d_min;
  p.q = q;
  return p;
}

std::vector<SafetyPair> all_pairs(int n_agents, int n_obstacles, double d_obs, double d_bary) {
  std::vector<SafetyPair> out;
  for (int i = 0; i < n_agents; ++i) {
    for (int j = 0; j < n_obstacles; ++j) out.push_back(pair(PairKind::AgentObstacle, i, j, d_obs));
  }
  for (int j = 0; j < n_obstacles; ++j) out.push_back(pair(PairKind::BarycenterObstacle, -1, j, d_bary));
  for (int i = 0; i < n_agents; ++i) {
    for (int j = i + 1; j < n_agents; ++j) out.push_back(pair(PairKind::AgentAgent, i, j, 10));
  }
  return out;
}

struct Fleet {
  std::vector<AgentState> agents;
  std::vector<ObstacleState> obstacles;
  std::vector<double> a_desired;
  std::vector<AgentLimits> limits;
};

Fleet spread_fleet(int n_agents, int n_obstacles) {
  Fleet f;
  for (int k = 0; k < n_agents; ++k) f.agents.push_back(agent(25.0 * k, 7.0 * (k % 3), 0.1 * k, 0.5));
  for (int j = 0; j < n_obstacles; ++j) f.obstacles.push_back(obstacle(300 + 40.0 * j, -20.0 * j, -0.2, 0.1));
  f.a_desired.assign(static_cast<std::size_t>(n_agents), 0.01);
  f.limits.assign(static_cast<std::size_t>(n_agents), AgentLimits{});
  return f;
}

const ScbfParams kParams{};

}  // namespace

TEST(Assemble, RowCounts) {
  {
    const Fleet f = spread_fleet(5, 2);
    const auto pairs = all_pairs(5, 2, 15, 60);
    EXPECT_EQ(assemble(pairs, f.agents, f.obstacles, f.a_desired, f.limits, kParams, ConstraintMode::PairwiseObstacle)
                  .rows.size(),
              20u);
    EXPECT_EQ(assemble(pairs, f.agents, f.obstacles, f.a_desired, f.limits, kParams, ConstraintMode::Both).rows.size(),
              22u);
  }
  {
    const Fleet f = spread_fleet(7, 1);
    const auto pairs = all_pairs(7, 1, 30, 100);
    const ConstraintSystem s =
        assemble(pairs, f.agents, f.obstacles, f.a_desired, f.limits, kParams, ConstraintMode::BarycenterObstacle);
    EXPECT_EQ(s.rows.size(), 22u);
    EXPECT_EQ(s.rows.front().source.kind, PairKind::BarycenterObstacle);
  }
  {
    const Fleet f = spread_fleet(1, 0);
    const auto pairs = all_pairs(1, 0, 15, 60);
    const ConstraintSystem s =
        assemble(pairs, f.agents, f.obstacles, f.a_desired, f.limits, kParams, ConstraintMode::PairwiseObstacle);
    EXPECT_TRUE(s.rows.empty());
    EXPECT_EQ(s.G().rows(), 0);
    EXPECT_EQ(s.r_max.size(), 1);
  }
}

TEST(Assemble, DeterministicOrderIndependentOfInputOrder) {
  const Fleet f = spread_fleet(5, 2);
  auto pairs = all_pairs(5, 2, 15, 60);
  const ConstraintSystem a =
      assemble(pairs, f.agents, f.obstacles, f.a_desired, f.limits, kParams, ConstraintMode::Both);
  std::mt19937_64 rng(31);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  const ConstraintSystem b =
      assemble(pairs, f.agents, f.obstacles, f.a_desired, f.limits, kParams, ConstraintMode::Both);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  EXPECT_EQ(a.G(), b.G());
  EXPECT_EQ(a.b(), b.b());
  for (std::size_t k = 1; k < a.rows.size(); ++k) {
    const auto& p = a.rows[k - 1].source;
    const auto& c = a.rows[k].source;
    if (p.kind == c.kind && p.kind != PairKind::BarycenterObstacle) EXPECT_TRUE(p.i < c.i || (p.i == c.i && p.j < c.j));
  }
  EXPECT_EQ(a.rows[0].source.kind, PairKind::AgentObstacle);
  EXPECT_EQ(a.rows[10].source.kind, PairKind::BarycenterObstacle);
  EXPECT_EQ(a.rows[12].source.kind, PairKind::AgentAgent);
}

TEST(RowAgentObstacle, CoefficientAndBoundFormula) {
  std::mt19937_64 rng(32);
  for (int k = 0; k < 500; ++k) {
    const AgentState a = oracle::random_agent(rng);
    const ObstacleState o = oracle::random_obstacle(rng);
    if ((o.p - a.p).norm() < 1) continue;
    const SafetyPair p = pair(PairKind::AgentObstacle, 2, 0, 12, (k % 2) ? 1 : -1);
    const double ad = 0.1;
    const ConstraintRow row = row_agent_obstacle(p, a, o, ad, 4, kParams);
    const BarrierEval e = h2_pair(a, o, 12, p.q, kParams);
    EXPECT_EQ(row.coefficients.size(), 4);
    EXPECT_EQ(row.coefficients(2), e.lg_r_i());
    EXPECT_EQ(row.coefficients(0), 0.0);
    EXPECT_EQ(row.coefficients(3), 0.0);
    EXPECT_DOUBLE_EQ(row.bound, -e.lf_h2 - e.lg_a_i() * ad - kParams.gamma2 * e.h2);
  }
}

// The row is the discretized condition dh2/dt + gamma2 h2 <= 0: re-derive the
// derivative by differencing h2 along the closed-loop flow.
TEST(RowAgentObstacle, ConsistentWithFiniteDifferenceDerivative) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> rr(-0.5, 0.5);
  for (int k = 0; k < 300; ++k) {
    const AgentState a = oracle::random_agent(rng);
    const ObstacleState o = oracle::random_obstacle(rng);
    if ((o.p - a.p).norm() < 2) continue;
    const double ad = 0.05;
    const ConstraintRow row = row_agent_obstacle(pair(PairKind::AgentObstacle, 0, 0, 10), a, o, ad, 1, kParams);
    const double r = rr(rng);
    oracle::Flat f = oracle::from_pair_state(PairState::agent_obstacle(a, o, 10));
    auto shifted = [&](double tau) {
      oracle::Flat t = f;
      t.x[0] += tau * a.u * std::cos(a.psi);
      t.x[1] += tau * a.u * std::sin(a.psi);
      t.x[2] += tau * r;
      t.x[3] += tau * ad;
      t.x[4] += tau * o.v.x();
      t.x[5] += tau * o.v.y();
      t.x[6] += tau * o.a.x();
      t.x[7] += tau * o.a.y();
      return oracle::h2(t, 10, 1, kParams.vartheta, kParams.gamma0);
    };
    const double h = 1e-4;
    const double hdot = (shifted(h) - shifted(-h)) / (2 * h);
    const double lhs = hdot + kParams.gamma2 * oracle::h2(f, 10, 1, kParams.vartheta, kParams.gamma0);
    const double rhs = row.coefficients(0) * r - row.bound;
    EXPECT_TRUE(oracle::close_rel(lhs, rhs, 1e-5)) << lhs << " vs " << rhs;
  }
}

TEST(RowAgentObstacle, HeadOnAndFarAway) {
  const AgentState a = agent(0, 0, 0, 0.5);
  const ConstraintRow head = row_agent_obstacle(pair(PairKind::AgentObstacle, 0, 0, 10), a,
                                                obstacle(20, 0, -0.5, 0), 0.0, 1, kParams);
  const BarrierEval e = h2_pair(a, obstacle(20, 0, -0.5, 0), 10, 1, kParams);
  EXPECT_EQ(head.coefficients(0), e.lg_r_i());

  const ConstraintRow far = row_agent_obstacle(pair(PairKind::AgentObstacle, 0, 0, 10), a,
                                               obstacle(100, 0, -0.5, 0), 0.0, 1, kParams);
  EXPECT_GT(far.bound, 0.0);
  EXPECT_GT(far.bound, std::abs(far.coefficients(0)) * AgentLimits{}.r_max);
}

TEST(RowAgentObstacle, CriticalOrientationHasZeroCoefficient) {
  AgentState a = agent(0, 0, 0, 0.5);
  const ObstacleState o = obstacle(30, 30, 0, 0);
  a.psi = bearing(a.p, o.p).value() - kParams.vartheta;
  const ConstraintRow row = row_agent_obstacle(pair(PairKind::AgentObstacle, 0, 0, 10), a, o, 0, 1, kParams);
  EXPECT_LT(std::abs(row.coefficients(0)), kCoefficientFloor);
  EXPECT_FALSE(row.active_hint);
}

TEST(RowAgentAgent, SymmetricHeadOnAndPartnerIndependence) {
  const AgentState ai = agent(0, 0, 0.1, 0.5);
  const AgentState aj = agent(40, 0, pi + 0.1, 0.5);
  const ConstraintRow row = row_agent_agent(pair(PairKind::AgentAgent, 0, 1, 10), ai, aj, 0, 0, 2, kParams);
  EXPECT_EQ(row.coefficients.size(), 2);
  EXPECT_NE(row.coefficients(0), 0.0);
  EXPECT_NE(row.coefficients(1), 0.0);
  const ConstraintRow other =
      row_agent_agent(pair(PairKind::AgentAgent, 0, 1, 10, -1), ai, aj, 0, 0, 2, kParams);
  EXPECT_EQ(row.coefficients(1), other.coefficients(1));

  // Bound subtracts both desired-acceleration terms.
  const BarrierEval e = h2_agents(ai, aj, 10, 1, kParams);
  const ConstraintRow acc = row_agent_agent(pair(PairKind::AgentAgent, 0, 1, 10), ai, aj, 0.1, -0.2, 2, kParams);
  EXPECT_DOUBLE_EQ(acc.bound, -e.lf_h2 - e.lg_a_i() * 0.1 + e.lg_a_j() * 0.2 - kParams.gamma2 * e.h2);
}

TEST(RowAgentAgent, ParallelCoursesInactiveAtZero) {
  const AgentState ai = agent(0, 0, 0.3, 0.5);
  const AgentState aj = agent(0, 25, 0.3, 0.5);
  const ConstraintRow row = row_agent_agent(pair(PairKind::AgentAgent, 0, 1, 10), ai, aj, 0, 0, 2, kParams);
  EXPECT_GT(row.bound, 0.0);
}

TEST(RowBarycenter, SingleAgentEqualsAgentRow) {
  std::mt19937_64 rng(34);
  for (int k = 0; k < 200; ++k) {
    const AgentState a = oracle::random_agent(rng);
    const ObstacleState o = oracle::random_obstacle(rng);
    if ((o.p - a.p).norm() < 1) continue;
    const std::vector<AgentState> fleet{a};
    const std::vector<double> ad{0.07};
    const ConstraintRow b = row_barycenter(pair(PairKind::BarycenterObstacle, -1, 0, 20), fleet, o, ad, kParams);
    const ConstraintRow p = row_agent_obstacle(pair(PairKind::AgentObstacle, 0, 0, 20), a, o, 0.07, 1, kParams);
    EXPECT_NEAR(b.coefficients(0), p.coefficients(0), 1e-10 * std::max(1.0, std::abs(p.coefficients(0))));
    EXPECT_NEAR(b.bound, p.bound, 1e-10 * std::max(1.0, std::abs(p.bound)));
  }
}

TEST(RowBarycenter, IdenticalVelocitiesGiveEqualCoefficients) {
  std::vector<AgentState> fleet;
  for (int k = 0; k < 5; ++k) fleet.push_back(agent(-10.0 + 5 * k, 3.0 * k - 6, 0.0, 0.6));
  const std::vector<double> ad(5, 0.0);
  const ConstraintRow row =
      row_barycenter(pair(PairKind::BarycenterObstacle, -1, 0, 50), fleet, obstacle(200, 0, 0, 0), ad, kParams);
  for (int k = 1; k < 5; ++k) EXPECT_NEAR(row.coefficients(k), row.coefficients(0), 1e-12);

  const AgentState single = agent(0, 0, 0, 0.6);
  const ConstraintRow one = row_agent_obstacle(pair(PairKind::AgentObstacle, 0, 0, 50), single,
                                               obstacle(200, 0, 0, 0), 0, 1, kParams);
  EXPECT_NEAR(row.coefficients.sum(), one.coefficients(0), 1e-9);
}

TEST(RowBarycenter, ZeroSpeedThrows) {
  const std::vector<AgentState> fleet{agent(0, 0, 0, 0.5), agent(0, 10, pi, 0.5)};
  const std::vector<double> ad(2, 0.0);
  EXPECT_THROW(
      row_barycenter(pair(PairKind::BarycenterObstacle, -1, 0, 50), fleet, obstacle(200, 0, 0, 0), ad, kParams),
      DegenerateGeometry);
}

TEST(Feasibility, BetaFiveWorkedExample) {
  AgentLimits lim;
  lim.r_max = 5;
  const FeasibilityParams f = feasibility_params(lim, 10, 0.1, 0.2, 0.0);
  EXPECT_NEAR(f.beta2, 2 * (1.0 / 10) + 0.25 / 0.3, 1e-12);
  EXPECT_NEAR(f.beta3, 0.25 / 0.3 + 0.1 * (0.5 / 0.3), 1e-12);
  const FeasibilityMargin m = feasibility_margin(lim, 10, 0.1, 0.2, 0.0);
  EXPECT_NEAR(m.margin, 6.79, 0.05);
  EXPECT_TRUE(m.certified());
  EXPECT_GT(std::sin(m.vartheta), 0.999);
}

TEST(Feasibility, ShippedLimitsAreNotCertified) {
  const AgentLimits lim;  // r_max 0.5
  EXPECT_LT(feasibility_margin(lim, 10, 0.1, 0.2, 0.0).margin, 0.0);
  EXPECT_LT(feasibility_margin_joint(lim, 10, 0.2, 0.0).margin, 0.0);
}

TEST(Feasibility, PureRateTerm) {
  FeasibilityParams f;
  f.beta1 = 1;
  for (double t = 0.01; t < pi / 2; t += 0.01) {
    EXPECT_EQ(feasibility_expression(f, t) > 0, 4 * std::sin(t) > std::sqrt(5.0));
  }
}

TEST(Feasibility, Monotonicity) {
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> u(0, 5);
  std::uniform_real_distribution<double> t(1e-3, pi / 2 - 1e-3);
  for (int k = 0; k < 10000; ++k) {
    FeasibilityParams f{u(rng), u(rng), u(rng)};
    const double th = t(rng);
    const double base = feasibility_expression(f, th);
    const double step = 0.1;
    FeasibilityParams g = f;
    g.beta2 += step;
    EXPECT_LE(feasibility_expression(g, th), base);
    g = f;
    g.beta3 += step;
    EXPECT_LE(feasibility_expression(g, th), base);
    // Larger beta1 helps only where 4 sin^2 t >= sqrt5 sin t.
    g = f;
    g.beta1 += step;
    if (4 * std::sin(th) >= std::sqrt(5.0)) EXPECT_GE(feasibility_expression(g, th), base);
  }
  // The sup over vartheta is nondecreasing in beta1.
  AgentLimits lo;
  AgentLimits hi;
  hi.r_max = 0.6;
  EXPECT_GE(feasibility_margin(hi, 10, 0.1, 0.2, 0).margin, feasibility_margin(lo, 10, 0.1, 0.2, 0).margin);
}
