#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "defclust/importance_sampling.hpp"
#include "defclust/ldp.hpp"
#include "defclust/scenarios.hpp"
#include "oracles.hpp"

using namespace defclust;

namespace {

double log_choose(int n, int k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

// Exact second moment of the tilted estimator: sum over k >= k* of
// P_theta(K = k) w(k)^2 with w(k) = exp(-theta k + N Lambda(theta)).
double exact_second_moment(int n, double p, double ell, double theta) {
  const double pt = p * std::exp(theta) / (1.0 + p * std::expm1(theta));
  const double lam = std::log1p(p * std::expm1(theta));
  const int kstar = static_cast<int>(std::ceil(ell * n - 1e-9));
  double q = 0.0;
  for (int k = kstar; k <= n; ++k)
    q += std::exp(log_choose(n, k) + k * std::log(pt) + (n - k) * std::log1p(-pt) - 2.0 * theta * k + 2.0 * n * lam);
  return q;
}

double exact_tail(int n, double p, double ell) { return exact_second_moment(n, p, ell, 0.0); }

// Constant intensity with default probability p over [0, 1].
TypeParams constant_type(double p) {
  const double l = -std::log1p(-p);
  return {l, 1.0, l, 0.0, 0.0, 0.0};
}

}  // namespace

TEST(Tilt, ThetaStarReachesLevel) {
  const double th = theta_star(0.3, 0.5);
  EXPECT_NEAR(th, std::log(7.0 / 3.0), 1e-15);
  EXPECT_NEAR(tilted_probability(0.3, th), 0.5, 1e-15);
  EXPECT_EQ(theta_star(0.3, 0.2), 0.0);
  EXPECT_EQ(theta_star(0.3, 0.3), 0.0);
  EXPECT_THROW(theta_star(0.0, 0.5), std::invalid_argument);
  EXPECT_THROW(theta_star(0.3, 1.0), std::invalid_argument);
}

TEST(Tilt, TiltedProbabilityIncreasing) {
  EXPECT_EQ(tilted_probability(0.3, 0.0), 0.3);
  double prev = 0.0;
  for (double th = -5.0; th <= 5.0; th += 0.25) {
    const double v = tilted_probability(0.3, th);
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_EQ(log_mgf(0.3, 0.0), 0.0);
}

TEST(Tilt, RateIdentityOnRandomPairs) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int i = 0; i < 100; ++i) {
    double p = u(gen), ell = u(gen);
    if (ell < p) std::swap(p, ell);
    const double th = theta_star(p, ell);
    EXPECT_NEAR(th * ell - log_mgf(p, th), binomial_rate(p, ell), 1e-12) << "p=" << p << " l=" << ell;
  }
}

TEST(Tilt, WeightIdentity) {
  const double p = 0.3, th = theta_star(0.3, 0.5);
  const double pt = tilted_probability(p, th);
  for (int k = 0; k <= 10; ++k) {
    const double prod = std::pow(p / pt, k) * std::pow((1 - p) / (1 - pt), 10 - k);
    EXPECT_NEAR(tilted_weight(p, th, k, 10), prod, 1e-12 * prod);
  }
}

TEST(EstimateBinomial, MatchesExactTail) {
  const auto est = estimate_binomial(0.3, 0.5, 10, 100000, SeedSpec{42});
  EXPECT_NEAR(est.estimate, oracle::kBinomTail, 3.0 * est.std_error);
  EXPECT_NEAR(est.parameter, std::log(7.0 / 3.0), 1e-15);
  EXPECT_NEAR(est.relative_error, est.std_error / est.estimate, 1e-15);
  EXPECT_EQ(est.n_samples, 100000u);
}

TEST(EstimateBinomial, ZeroTiltIsPlainMonteCarlo) {
  const auto est = estimate_binomial(0.3, 0.5, 10, 20000, SeedSpec{5}, 0.0);
  // all weights are 1, so Q equals the estimate
  EXPECT_DOUBLE_EQ(est.second_moment, est.estimate);
  EXPECT_NEAR(est.estimate, oracle::kBinomTail, 4.0 * est.std_error);
}

TEST(EstimateBinomial, SecondMomentMatchesExact) {
  const double th = theta_star(0.3, 0.5);
  const auto est = estimate_binomial(0.3, 0.5, 50, 100000, SeedSpec{9});
  const double q = exact_second_moment(50, 0.3, 0.5, th);
  EXPECT_NEAR(est.second_moment, q, 0.03 * q);
  // upper bound from Jensen: Q >= P^2
  EXPECT_LE(est.decay, -2.0 * std::log(exact_tail(50, 0.3, 0.5)) / 50.0 + 0.01);
}

TEST(EstimateBinomial, VarianceReductionOverPlain) {
  const auto est = estimate_binomial(0.3, 0.5, 100, 10000, SeedSpec{3});
  const double p = exact_tail(100, 0.3, 0.5);
  EXPECT_NEAR(est.estimate, p, 3.0 * est.std_error);
  EXPECT_GT(p * (1.0 - p) / est.variance, 100.0);
}

TEST(EstimateBinomial, Deterministic) {
  const auto a = estimate_binomial(0.3, 0.5, 20, 5000, SeedSpec{77});
  const auto b = estimate_binomial(0.3, 0.5, 20, 5000, SeedSpec{77});
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.second_moment, b.second_moment);
  EXPECT_THROW(estimate_binomial(0.3, 0.5, 20, 0, SeedSpec{77}), std::invalid_argument);
}

TEST(EstimateIndependent, UsesSurvivalProbability) {
  const TimeGrid grid(1.0, 100);
  const auto params = constant_type(0.3);
  const auto est = estimate_independent(params, grid, 0.5, 10, 50000, SeedSpec{8});
  EXPECT_NEAR(est.estimate, oracle::kBinomTail, 3.0 * est.std_error);
  TypeParams contagious = params;
  contagious.beta_c = 1.0;
  EXPECT_THROW(estimate_independent(contagious, grid, 0.5, 10, 100, SeedSpec{8}), std::invalid_argument);
}

TEST(OptimalityCheck, DecayApproachesTwiceTheRate) {
  const auto rows = optimality_check(0.3, 0.5, {25, 50, 100, 200}, 20000, SeedSpec{21});
  const double target = 2.0 * oracle::kRateIndependent;
  ASSERT_EQ(rows.size(), 4u);
  double prev = 1e300;
  for (const auto& r : rows) {
    EXPECT_NEAR(r.target, target, 1e-15);
    const double gap = std::abs(r.decay - target);
    EXPECT_LT(gap, prev) << "N=" << r.n_names;
    prev = gap;
  }
}

TEST(EstimateHeterogeneous, PoissonBinomialTail) {
  const auto est = estimate_poisson_binomial({0.2, 0.4}, {5, 5}, 0.6, 100000, SeedSpec{13});
  EXPECT_NEAR(est.estimate, oracle::kPoissonBinomTail, 3.0 * est.std_error);
  double mean_tilted = 0.5 * (tilted_probability(0.2, est.parameter) + tilted_probability(0.4, est.parameter));
  EXPECT_NEAR(mean_tilted, 0.6, 1e-10);
}

TEST(EstimateHeterogeneous, EqualProbabilitiesReduceToBinomial) {
  const auto a = estimate_poisson_binomial({0.3, 0.3}, {4, 6}, 0.5, 20000, SeedSpec{4});
  const auto b = estimate_binomial(0.3, 0.5, 10, 20000, SeedSpec{4});
  EXPECT_NEAR(a.parameter, b.parameter, 1e-10);
  EXPECT_NEAR(a.estimate, b.estimate, 1e-12);
}

TEST(EstimateHeterogeneous, FromPool) {
  const TimeGrid grid(1.0, 100);
  PoolSpec pool{{{constant_type(0.2), 0.5}, {constant_type(0.4), 0.5}}, 10};
  const auto est = estimate_heterogeneous_independent(pool, grid, 0.6, 50000, SeedSpec{6});
  EXPECT_NEAR(est.estimate, oracle::kPoissonBinomTail, 3.0 * est.std_error);
  EXPECT_THROW(estimate_heterogeneous_independent(pool, grid, 1.0, 100, SeedSpec{6}), std::invalid_argument);
}

TEST(EstimateDependent, IndependentSubcaseMatchesBinomial) {
  const TimeGrid grid(1.0, 50);
  PoolSpec pool{{{constant_type(0.3), 1.0}}, 10};
  for (double beta : {0.5, 1.0}) {
    const auto est = estimate_dependent(pool, FactorSpec::none(), grid, 0.5, beta, 100000, SeedSpec{31});
    EXPECT_NEAR(est.estimate, oracle::kBinomTail, 3.0 * est.std_error) << "beta=" << beta;
    EXPECT_EQ(est.degenerate_paths, 0u);
  }
}

TEST(EstimateDependent, ZeroBetaIsPlainSimulation) {
  const TimeGrid grid(1.0, 100);
  const auto pool = scenarios::table1_pool(60);
  const auto factor = scenarios::table1_factor(60);
  const SeedSpec seed{17};
  const auto est = estimate_dependent(pool, factor, grid, 0.75, 0.0, 400, seed);
  const auto ens = simulate_ensemble(pool, factor, grid, 400, seed);
  std::size_t hits = 0;
  for (double l : ens.terminal) hits += l >= 0.75 - 1e-12;
  EXPECT_DOUBLE_EQ(est.estimate, static_cast<double>(hits) / 400.0);
  EXPECT_DOUBLE_EQ(est.second_moment, est.estimate);
}

TEST(EstimateDependent, UnbiasedAgainstPlainWithContagion) {
  const TimeGrid grid(1.0, 100);
  const auto pool = scenarios::table1_pool(30);
  const auto factor = scenarios::table1_factor(30);
  const auto plain = estimate_dependent(pool, factor, grid, 0.8, 0.0, 20000, SeedSpec{1});
  const auto tilted = estimate_dependent(pool, factor, grid, 0.8, 0.5, 20000, SeedSpec{2});
  const double joint = std::hypot(plain.std_error, tilted.std_error);
  EXPECT_NEAR(plain.estimate, tilted.estimate, 4.0 * joint);
  EXPECT_GT(plain.estimate, 0.0);
}

TEST(SelectBeta, GridOfZero) {
  const TimeGrid grid(1.0, 50);
  PoolSpec pool{{{constant_type(0.3), 1.0}}, 10};
  const auto sel = select_beta(pool, FactorSpec::none(), grid, 0.5, {0.0}, 1000, SeedSpec{1});
  EXPECT_EQ(sel.beta, 0.0);
  ASSERT_EQ(sel.table.size(), 1u);
  EXPECT_THROW(select_beta(pool, FactorSpec::none(), grid, 0.5, {}, 1000, SeedSpec{1}), std::invalid_argument);
}

TEST(SelectBeta, ArgminOfSecondMoment) {
  const TimeGrid grid(1.0, 50);
  PoolSpec pool{{{constant_type(0.3), 1.0}}, 10};
  const auto sel = select_beta(pool, FactorSpec::none(), grid, 0.7, {0.0, 0.25, 0.5, 1.0}, 5000, SeedSpec{1});
  double q0 = 0.0, qbest = 1e300;
  for (const auto& row : sel.table) {
    if (row.beta == 0.0) q0 = row.second_moment;
    qbest = std::min(qbest, row.second_moment);
  }
  EXPECT_LE(qbest, q0);
  for (const auto& row : sel.table)
    if (row.beta == sel.beta) EXPECT_EQ(row.second_moment, qbest);
}

TEST(SelectBeta, VarianceReductionForTable1Tail) {
  const TimeGrid grid(1.0, 200);
  const auto pool = scenarios::table1_pool(200);
  const auto factor = scenarios::table1_factor(200);
  const auto sel = select_beta(pool, factor, grid, 0.9, {0.0, 0.1, 0.2, 0.4, 0.8}, 1000, SeedSpec{5});
  const auto est = estimate_dependent(pool, factor, grid, 0.9, sel.beta, 2000, SeedSpec{6});
  ASSERT_GT(est.estimate, 0.0);
  // plain Monte Carlo has per-sample variance P (1 - P)
  EXPECT_GT(est.estimate * (1.0 - est.estimate) / est.variance, 10.0);
}
