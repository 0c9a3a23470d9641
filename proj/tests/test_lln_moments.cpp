#include <gtest/gtest.h>

#include <cmath>

#include "defclust/affine_survival.hpp"
#include "defclust/exact_sim.hpp"
#include "defclust/lln_moments.hpp"
#include "defclust/scenarios.hpp"
#include "oracles.hpp"

using namespace defclust;

namespace {

double sample_variance(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST(Lln, IndependentNamesGiveDefaultProbability) {
  const TimeGrid g(1.0, 200);
  const TypeParams p = scenarios::betacone_type(0.0, 0.0);
  const auto traj = solve_lln(scenarios::homogeneous_pool(p, 100), FactorSpec::none(), g, 12);
  const auto curve = survival_curve(p, ForcedPaths::zero(g), 12);
  for (std::size_t j = 0; j < g.size(); j += 20) EXPECT_NEAR(traj.losses[j], curve.cdf(j), 1e-4);
  EXPECT_NEAR(traj.terminal_loss(), 1.0 - oracle::kCirSurvivalT1, 1e-4);
}

TEST(Lln, Table1DeterministicLosses) {
  // Closed-form CIR loss without contagion and an independent RK4 solution of
  // the coupled system with contagion.
  const TimeGrid g(1.0, 500);
  auto f = scenarios::table1_factor(200);
  f.epsilon = 0.0;
  const double no_contagion = solve_lln(scenarios::table1_pool(200, false), f, g, 12).terminal_loss();
  const double contagion = solve_lln(scenarios::table1_pool(200, true), f, g, 12).terminal_loss();
  EXPECT_NEAR(no_contagion, oracle::kTable1DefaultProb, 1e-6);
  EXPECT_NEAR(contagion, 0.695941, 1e-5);
}

TEST(Lln, TruncationStability) {
  const TimeGrid g(1.0, 500);
  auto f = scenarios::table1_factor(200);
  f.epsilon = 0.0;
  const auto pool = scenarios::table1_pool(200);
  const double a = solve_lln(pool, f, g, 12).terminal_loss();
  const double b = solve_lln(pool, f, g, 16).terminal_loss();
  EXPECT_LT(std::abs(a - b), 1e-5);
}

TEST(Lln, InvariantsAlongPath) {
  const TimeGrid g(1.0, 500);
  const auto pool = scenarios::homogeneous_pool(scenarios::betacone_type(), 100);
  const auto traj = solve_lln(pool, FactorSpec::ou(2.0, 1.0, 1.0, 1.0, 1.0), g, 12, std::nullopt, {4, 0, 9});
  for (std::size_t j = 1; j < g.size(); ++j) {
    ASSERT_LE(traj(j, 0, 0), traj(j - 1, 0, 0) + 1e-12);
    ASSERT_GE(traj.losses[j], 0.0);
    ASSERT_LE(traj.losses[j], 1.0);
    for (std::size_t k = 0; k <= 12; ++k) ASSERT_GE(traj(j, 0, k), 0.0);
  }
}

TEST(Lln, ConditionalLawWithoutContagionMatchesForcedSurvival) {
  // Given X, a name without contagion has forcing psi = e (X - x0) and an
  // Ito correction that raises alpha by (e bS s0)^2 / 2.
  const TimeGrid g(1.0, 1000);
  const TypeParams p{0.2, 4.0, 0.2, 0.9, 0.0, 1.5};
  const auto f = FactorSpec::ou(2.0, 1.0, 1.0, 1.0, 1.0);
  const auto xp = simulate_factor_path(f, g, {12, 0, 3});
  const auto traj = solve_lln(scenarios::homogeneous_pool(p, 10), f, g, 12, xp);

  ForcedPaths forcing = ForcedPaths::zero(g);
  for (std::size_t j = 0; j < g.size(); ++j) forcing.psi[j] = f.epsilon * (xp.x[j] - xp.x[0]);
  TypeParams q = p;
  q.alpha = p.alpha + 0.5 * p.beta_s * p.beta_s;
  q.lambda_bar = p.alpha * p.lambda_bar / q.alpha;
  const auto curve = survival_curve(q, forcing, 12);
  EXPECT_NEAR(traj.terminal_loss(), curve.p_horizon(), 2e-3);
}

TEST(Lln, PointMassWithoutFactor) {
  const TimeGrid g(1.0, 100);
  const auto s = lln_loss_distribution(scenarios::homogeneous_pool(scenarios::betacone_type(4.0, 0.0), 10),
                                       FactorSpec::none(), g, 12, 16, {1, 0});
  for (double v : s.terminal) EXPECT_EQ(v, s.terminal.front());
}

TEST(Lln, SystematicSensitivityFattensTail) {
  const TimeGrid g(1.0, 500);
  const auto f = FactorSpec::ou(2.0, 1.0, 1.0, 1.0, 1.0);
  const auto low = lln_loss_distribution(scenarios::homogeneous_pool(scenarios::betacone_type(2.0, 1.0), 10), f, g,
                                         12, 2000, {3, 0});
  const auto high = lln_loss_distribution(scenarios::homogeneous_pool(scenarios::betacone_type(2.0, 4.0), 10), f, g,
                                          12, 2000, {3, 0});
  EXPECT_GT(sample_variance(high.terminal), sample_variance(low.terminal));
}

TEST(Lln, MeanMatchesExactSimulation) {
  const TimeGrid g(1.0, 200);
  const auto pool = scenarios::homogeneous_pool(scenarios::betacone_type(2.0, 1.0), 400);
  const auto f = FactorSpec::ou(2.0, 1.0, 1.0, 1.0, 1.0);
  const std::size_t n = 400;
  const auto lln = lln_loss_distribution(pool, f, g, 12, n, {7, 0});
  const auto sim = simulate_ensemble(pool, f, g, n, {7, 0});
  std::vector<double> diff(n);
  for (std::size_t j = 0; j < n; ++j) diff[j] = sim.terminal[j] - lln.terminal[j];
  double m = 0.0;
  for (double d : diff) m += d;
  m /= static_cast<double>(n);
  EXPECT_LT(std::abs(m), 4.0 * std::sqrt(sample_variance(diff) / static_cast<double>(n)) + 2e-3);
}

TEST(Lln, RejectsLowOrder) {
  EXPECT_THROW(solve_lln(scenarios::table1_pool(10), FactorSpec::none(), TimeGrid(1.0, 10), 1),
               std::invalid_argument);
}

TEST(Lln, ExtremeFactorPathsStayInUnitInterval) {
  const TimeGrid g(1.0, 500);
  const auto s = lln_loss_distribution(scenarios::homogeneous_pool(scenarios::betacone_type(4.0, 8.0), 10),
                                       FactorSpec::ou(2.0, 1.0, 1.0, 1.0, 1.0), g, 12, 2000, {3, 0});
  for (double v : s.terminal) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
  EXPECT_LT(s.projected_paths, 100u);
}
