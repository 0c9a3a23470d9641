#pragma once

// Importance-sampling estimators of P{L^N_T >= l}.
//
// Independent names are sampled as Bernoulli(p_theta) with the exponential
// tilt p_theta = p e^theta / (1 + p (e^theta - 1)) and weighted by
// exp(-theta K + N Lambda(theta)), Lambda(theta) = ln(1 + p (e^theta - 1)),
// where K is the number of defaults. The dependent case uses the intensity
// twist of PoolSimulator, which adds a pool-wide default clock of rate beta N
// until the ceil(l N)-th default.

#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "defclust/affine_survival.hpp"
#include "defclust/exact_sim.hpp"
#include "defclust/ldp.hpp"
#include "defclust/parallel.hpp"
#include "defclust/rng.hpp"

namespace defclust {

inline double tilted_probability(double p, double theta) {
  return p * std::exp(theta) / (1.0 + p * std::expm1(theta));
}

/// Lambda(theta) = ln(p (e^theta - 1) + 1).
inline double log_mgf(double p, double theta) { return std::log1p(p * std::expm1(theta)); }

/// Tilt with p_theta = l when l > p, zero otherwise.
inline double theta_star(double p, double ell) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("default probability must lie in (0, 1)");
  if (!(ell > 0.0 && ell < 1.0)) throw std::invalid_argument("loss level must lie in (0, 1)");
  if (ell <= p) return 0.0;
  return std::log(ell * (1.0 - p) / (p * (1.0 - ell)));
}

/// Likelihood ratio dP/dP_theta of a sample with k defaults among n names.
inline double tilted_weight(double p, double theta, std::size_t k, std::size_t n) {
  return std::exp(-theta * static_cast<double>(k) + static_cast<double>(n) * log_mgf(p, theta));
}

struct ISEstimate {
  double estimate = 0.0;
  double variance = 0.0;  // per-sample variance
  double std_error = 0.0;
  double relative_error = 0.0;
  std::size_t n_samples = 0;
  std::size_t hits = 0;           // samples with L^N_T >= l
  double second_moment = 0.0;     // Q-hat, mean of squared samples
  double second_moment_std_error = 0.0;
  double decay = 0.0;             // -(1/N) ln Q-hat
  double parameter = 0.0;         // theta or beta
  std::size_t n_names = 0;
  std::size_t degenerate_paths = 0;
};

namespace detail {

inline ISEstimate summarize(const std::vector<double>& v, std::size_t n_names, double parameter) {
  ISEstimate e;
  e.n_samples = v.size();
  e.n_names = n_names;
  e.parameter = parameter;
  double s = 0.0, s2 = 0.0;
  for (double x : v) {
    s += x;
    s2 += x * x;
    e.hits += x > 0.0;
  }
  const auto m = static_cast<double>(v.size());
  e.estimate = s / m;
  e.second_moment = s2 / m;
  double ss = 0.0;
  double qq = 0.0;
  for (double x : v) {
    ss += (x - e.estimate) * (x - e.estimate);
    qq += (x * x - e.second_moment) * (x * x - e.second_moment);
  }
  e.variance = v.size() > 1 ? ss / (m - 1.0) : 0.0;
  e.second_moment_std_error = v.size() > 1 ? std::sqrt(qq / (m - 1.0) / m) : 0.0;
  e.std_error = std::sqrt(e.variance / m);
  e.relative_error = e.estimate > 0.0 ? e.std_error / e.estimate : std::numeric_limits<double>::infinity();
  e.decay = e.second_moment > 0.0 ? -std::log(e.second_moment) / static_cast<double>(n_names)
                                  : std::numeric_limits<double>::infinity();
  return e;
}

// Groups of independent names with default probabilities ps[i] and sizes
// counts[i], all tilted by theta. Sample j reads the Bernoulli substream of
// seed.stream(j), names in group order.
inline ISEstimate tilted_bernoulli(const std::vector<double>& ps, const std::vector<std::size_t>& counts,
                                   double theta, double ell, std::size_t n_samples, const SeedSpec& seed) {
  if (n_samples == 0) throw std::invalid_argument("number of samples must be at least 1");
  std::size_t n = 0;
  double log_norm = 0.0;
  std::vector<double> pt(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    n += counts[i];
    log_norm += static_cast<double>(counts[i]) * log_mgf(ps[i], theta);
    pt[i] = tilted_probability(ps[i], theta);
  }
  if (n == 0) throw std::invalid_argument("pool has no names");
  const std::size_t target = defaults_for_level(ell, n);
  std::vector<double> v(n_samples);
  parallel_for(n_samples, [&](std::size_t j) {
    RandomStream rng(seed.stream(j), Substream::bernoulli);
    std::size_t k = 0;
    for (std::size_t i = 0; i < ps.size(); ++i)
      for (std::size_t c = 0; c < counts[i]; ++c) k += rng.uniform() < pt[i];
    v[j] = k >= target ? std::exp(-theta * static_cast<double>(k) + log_norm) : 0.0;
  });
  return summarize(v, n, theta);
}

inline void require_independent(const TypeParams& p) {
  if (p.beta_c != 0.0 || p.beta_s != 0.0)
    throw std::invalid_argument("independent estimators need beta_c = beta_s = 0");
}

}  // namespace detail

/// Tilted estimator for n independent names with default probability p.
/// theta defaults to theta_star(p, l).
inline ISEstimate estimate_binomial(double p, double ell, std::size_t n_names, std::size_t n_samples,
                                    const SeedSpec& seed, std::optional<double> theta = std::nullopt) {
  const double th = theta ? *theta : theta_star(p, ell);
  return detail::tilted_bernoulli({p}, {n_names}, th, ell, n_samples, seed);
}

/// Homogeneous independent pool; p = mu_0[0, T] from the survival solve.
inline ISEstimate estimate_independent(const TypeParams& params, const TimeGrid& grid, double ell,
                                       std::size_t n_names, std::size_t n_samples, const SeedSpec& seed,
                                       std::size_t order = 12) {
  detail::require_independent(params);
  return estimate_binomial(default_probability(params, grid, order), ell, n_names, n_samples, seed);
}

/// Common tilt theta with sum_i counts_i p_i,theta = l N; zero when l is at or
/// below the mean default probability.
inline double common_tilt(const std::vector<double>& ps, const std::vector<std::size_t>& counts, double ell) {
  if (!(ell > 0.0 && ell < 1.0)) throw std::invalid_argument("loss level must lie in (0, 1)");
  if (ps.empty() || ps.size() != counts.size()) throw std::invalid_argument("need one count per probability");
  double n = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!(ps[i] > 0.0 && ps[i] < 1.0)) throw std::invalid_argument("default probabilities must lie in (0, 1)");
    n += static_cast<double>(counts[i]);
  }
  auto excess = [&](double th) {
    double s = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) s += static_cast<double>(counts[i]) * tilted_probability(ps[i], th);
    return s / n - ell;
  };
  if (excess(0.0) >= 0.0) return 0.0;
  double hi = 1.0;
  while (excess(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e4) throw NumericalError("no tilt reaches the loss level");
  }
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(excess, 0.0, hi, boost::math::tools::eps_tolerance<double>(50),
                                                   iters);
  return 0.5 * (r.first + r.second);
}

/// Independent names in groups with probabilities ps and sizes counts.
inline ISEstimate estimate_poisson_binomial(const std::vector<double>& ps, const std::vector<std::size_t>& counts,
                                            double ell, std::size_t n_samples, const SeedSpec& seed) {
  return detail::tilted_bernoulli(ps, counts, common_tilt(ps, counts, ell), ell, n_samples, seed);
}

inline ISEstimate estimate_heterogeneous_independent(const PoolSpec& pool, const TimeGrid& grid, double ell,
                                                     std::size_t n_samples, const SeedSpec& seed,
                                                     std::size_t order = 12) {
  const auto counts = group_counts(pool);
  std::vector<double> ps;
  for (const auto& g : pool.groups) {
    detail::require_independent(g.params);
    ps.push_back(default_probability(g.params, grid, order));
  }
  return estimate_poisson_binomial(ps, counts, ell, n_samples, seed);
}

struct OptimalityRow {
  std::size_t n_names = 0;
  double decay = 0.0;   // -(1/N) ln Q-hat at theta*
  double target = 0.0;  // 2 I(l)
  double estimate = 0.0;
  double second_moment = 0.0;
};

/// Empirical second-moment decay at theta* for each pool size; size i uses
/// run seed.run + i.
inline std::vector<OptimalityRow> optimality_check(double p, double ell, const std::vector<std::size_t>& sizes,
                                                   std::size_t n_samples, const SeedSpec& seed) {
  const double target = ell > p ? 2.0 * binomial_rate(p, ell) : 0.0;
  std::vector<OptimalityRow> rows;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const auto e = estimate_binomial(p, ell, sizes[i], n_samples,
                                     seed.with_run(seed.run + static_cast<std::uint32_t>(i)));
    rows.push_back({sizes[i], e.decay, target, e.estimate, e.second_moment});
  }
  return rows;
}

inline std::vector<OptimalityRow> optimality_check(const TypeParams& params, const TimeGrid& grid, double ell,
                                                   const std::vector<std::size_t>& sizes, std::size_t n_samples,
                                                   const SeedSpec& seed, std::size_t order = 12) {
  detail::require_independent(params);
  return optimality_check(default_probability(params, grid, order), ell, sizes, n_samples, seed);
}

/// Intensity-twist estimator for the full model. Sample j is path
/// seed.stream(j); with beta = 0 it is plain simulation of the same paths.
inline ISEstimate estimate_dependent(const PoolSpec& pool, const FactorSpec& factor, const TimeGrid& grid,
                                     double ell, double beta, std::size_t n_samples, const SeedSpec& seed) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be nonnegative");
  if (n_samples == 0) throw std::invalid_argument("number of samples must be at least 1");
  if (!(ell > 0.0 && ell <= 1.0)) throw std::invalid_argument("loss level must lie in (0, 1]");
  const PoolSimulator sim(pool, factor, grid);
  const std::size_t n = pool.n_names;
  PathOptions opts;
  opts.twist = IntensityTwist{beta, defaults_for_level(ell, n), true};
  std::vector<double> v(n_samples);
  std::vector<std::uint8_t> degenerate(n_samples, 0);
  parallel_for(n_samples, [&](std::size_t j) {
    const auto r = sim.simulate(seed.stream(j), opts);
    degenerate[j] = r.degenerate;
    v[j] = r.reached_target ? std::exp(r.log_weight) : 0.0;
  });
  auto e = detail::summarize(v, n, beta);
  for (auto d : degenerate) e.degenerate_paths += d;
  return e;
}

struct BetaRow {
  double beta = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  double second_moment = 0.0;
  double second_moment_std_error = 0.0;
  std::size_t hits = 0;
};

struct BetaSelection {
  double beta = 0.0;
  std::vector<BetaRow> table;
};

/// Pilot runs over a grid of beta; returns the beta with the smallest
/// empirical second moment among rows with at least one hit (a row without
/// hits says nothing about Q). All rows share the pilot seed.
inline BetaSelection select_beta(const PoolSpec& pool, const FactorSpec& factor, const TimeGrid& grid,
                                 double ell, const std::vector<double>& betas, std::size_t n_pilot,
                                 const SeedSpec& seed) {
  if (betas.empty()) throw std::invalid_argument("beta grid must not be empty");
  BetaSelection sel;
  for (double b : betas) {
    const auto e = estimate_dependent(pool, factor, grid, ell, b, n_pilot, seed);
    sel.table.push_back({b, e.estimate, e.std_error, e.second_moment, e.second_moment_std_error, e.hits});
  }
  std::size_t best = sel.table.size();
  for (std::size_t i = 0; i < sel.table.size(); ++i) {
    if (sel.table[i].hits == 0) continue;
    if (best == sel.table.size() || sel.table[i].second_moment < sel.table[best].second_moment) best = i;
  }
  if (best == sel.table.size()) best = 0;
  sel.beta = sel.table[best].beta;
  return sel;
}

}  // namespace defclust
