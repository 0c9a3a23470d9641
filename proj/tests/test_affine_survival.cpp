#include <gtest/gtest.h>

#include <cmath>

#include "defclust/affine_survival.hpp"
#include "defclust/scenarios.hpp"
#include "oracles.hpp"

using namespace defclust;

namespace {
const TypeParams kTable1Type{0.2, 0.5, 2.0, 0.5, 1.0, 1.0};
}

TEST(ExpMoments, ConstantIntensity) {
  // At l = 1 the closure m_{K+1} = m_K is exact.
  const TimeGrid g(2.0, 100);
  const auto m = exp_moments({1.0, 0.0, 1.0, 0.0, 0.0, 0.0}, ForcedPaths::zero(g), 12);
  for (std::size_t j = 0; j < g.size(); j += 10) {
    EXPECT_NEAR(m(j, 0), std::exp(-g.time(j)), 1e-9);
    EXPECT_NEAR(m(j, 1), std::exp(-g.time(j)), 1e-9);
  }
  const auto m15 = exp_moments({1.5, 0.0, 1.5, 0.0, 0.0, 0.0}, ForcedPaths::zero(TimeGrid(1.0, 100)), 12);
  EXPECT_NEAR(m15(100, 0), std::exp(-1.5), 1e-7);
  EXPECT_NEAR(m15(100, 1), 1.5 * std::exp(-1.5), 1e-6);
}

TEST(ExpMoments, CirClosedForm) {
  const TimeGrid g(1.0, 100);
  const auto c = survival_curve(scenarios::betacone_type(), ForcedPaths::zero(g), 12);
  EXPECT_NEAR(c.survival.back(), oracle::kCirSurvivalT1, 1e-4);
  EXPECT_NEAR(c.survival[50], oracle::kCirSurvivalT05, 1e-4);
  EXPECT_NEAR(default_probability(kTable1Type, g), oracle::kTable1DefaultProb, 1e-6);
}

TEST(ExpMoments, LinearContagionForcing) {
  const TypeParams typeC = kTable1Type;
  const TimeGrid g(1.0, 100);
  const double s = survival_curve(typeC, ForcedPaths::linear(g, 0.5), 12).survival.back();
  EXPECT_NEAR(s, oracle::kTypeCForcedSurvival, 1e-6);
  EXPECT_NEAR(s, oracle::kTypeCForcedMc, 3.0 * oracle::kTypeCForcedMcStderr);
}

TEST(SurvivalCurve, DensityIntegratesToDefaultProbability) {
  const TimeGrid g(1.0, 400);
  const auto c = survival_curve(scenarios::betacone_type(), ForcedPaths::linear(g, 0.3, 0.2), 12);
  double integral = 0.0;
  for (std::size_t j = 0; j < g.n_steps; ++j) {
    integral += 0.5 * g.dt() * (c.density[j] + c.density[j + 1]);
    ASSERT_NEAR(integral, c.cdf(j + 1), 1e-5);
  }
  EXPECT_EQ(c.survival.front(), 1.0);
  for (std::size_t j = 1; j < g.size(); ++j) {
    EXPECT_LE(c.survival[j], c.survival[j - 1]);
    EXPECT_GE(c.density[j], 0.0);
  }
  EXPECT_DOUBLE_EQ(c.atom_mass(), 1.0 - c.p_horizon());
}

TEST(SurvivalCurve, MoreContagionForcingLowersSurvival) {
  const TimeGrid g(1.0, 100);
  double prev = 2.0;
  for (double rate : {0.0, 0.2, 0.5, 1.0}) {
    const double s = survival_curve(kTable1Type, ForcedPaths::linear(g, rate), 12).survival.back();
    EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(SurvivalCurve, NondegenerateForTypeA) {
  const double p = default_probability(scenarios::table1_pool(200).groups[0].params, TimeGrid(1.0, 100));
  EXPECT_GT(p, 0.0);
  EXPECT_LT(p, 1.0);
}

TEST(Truncation, Table1StableInK) {
  const TimeGrid g(1.0, 100);
  const double a = survival_curve(kTable1Type, ForcedPaths::zero(g), 12).survival.back();
  const double b = survival_curve(kTable1Type, ForcedPaths::zero(g), 20).survival.back();
  EXPECT_LT(std::abs(a - b), 1e-6);
}

TEST(Truncation, FinderReportsConvergedOrder) {
  const TimeGrid g(1.0, 100);
  const auto r = find_truncation_order(scenarios::betacone_type(), ForcedPaths::zero(g), 1e-8);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.last_difference, 1e-8);
  EXPECT_GE(r.order, 3u);
  EXPECT_LE(r.order, 40u);
}

TEST(ExpMoments, RejectsBadInput) {
  const TimeGrid g(1.0, 10);
  EXPECT_THROW(exp_moments(kTable1Type, ForcedPaths::zero(g), 1), std::invalid_argument);
  auto f = ForcedPaths::linear(g, 1.0);
  f.phi[5] = 0.0;
  EXPECT_THROW(exp_moments(kTable1Type, f, 12), std::invalid_argument);
}
