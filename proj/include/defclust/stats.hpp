#pragma once

// Sample statistics for loss distributions: quantiles, VaR and expected
// shortfall, goodness-of-fit and two-sample tests, histograms.

#include <algorithm>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace defclust::stats {

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Unbiased sample variance.
inline double variance(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("variance needs at least two samples");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

/// Inverse empirical CDF with linear interpolation between order statistics
/// (Hyndman-Fan type 7): position h = (n - 1) q on the sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, q);
}

struct RiskRow {
  double level = 0.0;
  double var = 0.0;
  double es = 0.0;
};

/// VaR at each level is the type-7 quantile; ES is the mean of the samples
/// at or above the VaR.
inline std::vector<RiskRow> var_es(std::vector<double> samples, const std::vector<double>& levels,
                                   std::size_t min_samples = 100) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  if (samples.size() < min_samples)
    throw std::invalid_argument("at least " + std::to_string(min_samples) + " samples are required");
  std::sort(samples.begin(), samples.end());
  std::vector<RiskRow> out;
  for (double level : levels) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("risk levels must lie in (0, 1)");
    const double v = quantile_sorted(samples, level);
    const auto first = std::lower_bound(samples.begin(), samples.end(), v);
    double excess = 0.0;
    for (auto it = first; it != samples.end(); ++it) excess += *it - v;
    const double es = v + excess / static_cast<double>(samples.end() - first);
    out.push_back({level, v, es});
  }
  return out;
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS distance of an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Asymptotic Kolmogorov tail P(K > t) = 2 sum (-1)^{k-1} exp(-2 k^2 t^2).
inline double kolmogorov_survival(double t) {
  if (t < 0.2) return 1.0;  // series converges slowly; the tail is 1 to double precision
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

inline double ks_pvalue(double d, std::size_t na, std::size_t nb) {
  const double ne = static_cast<double>(na) * static_cast<double>(nb) / static_cast<double>(na + nb);
  const double sq = std::sqrt(ne);
  return kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d);
}

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
  std::size_t bins = 0;  // after pooling
};

/// Chi-square test of observed counts against expected counts. Adjacent bins
/// are pooled left to right until each expected count is at least
/// min_expected; a short final group joins its predecessor.
inline ChiSquareResult chi_square_gof(const std::vector<double>& observed, const std::vector<double>& expected,
                                      double min_expected = 5.0) {
  if (observed.size() != expected.size() || observed.empty())
    throw std::invalid_argument("observed and expected counts must have the same nonzero length");
  std::vector<double> o, e;
  double ao = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ao += observed[i];
    ae += expected[i];
    if (ae >= min_expected) {
      o.push_back(ao);
      e.push_back(ae);
      ao = ae = 0.0;
    }
  }
  if (ae > 0.0 || ao > 0.0) {
    if (e.empty()) {
      o.push_back(ao);
      e.push_back(ae);
    } else {
      o.back() += ao;
      e.back() += ae;
    }
  }
  ChiSquareResult r;
  r.bins = o.size();
  for (std::size_t i = 0; i < o.size(); ++i) r.statistic += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
  if (o.size() < 2) return r;
  r.dof = o.size() - 1;
  r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(static_cast<double>(r.dof)),
                                                       r.statistic));
  return r;
}

/// Goodness of fit of default counts (histogram over 0..n) to Binomial(n, p).
inline ChiSquareResult binomial_gof(const std::vector<std::size_t>& histogram, double p) {
  const std::size_t n = histogram.size() - 1;
  double total = 0.0;
  for (auto c : histogram) total += static_cast<double>(c);
  const boost::math::binomial_distribution<double> dist(static_cast<double>(n), p);
  std::vector<double> obs(histogram.begin(), histogram.end()), exp(n + 1);
  for (std::size_t k = 0; k <= n; ++k) exp[k] = total * boost::math::pdf(dist, static_cast<double>(k));
  return chi_square_gof(obs, exp);
}

struct AndersonDarlingResult {
  double statistic = 0.0;  // A^2 with the small-sample correction (1 + 0.75/n + 2.25/n^2)
  bool reject_1pct = false;  // critical value 1.035 for estimated mean and variance
};

/// Anderson-Darling test of normality with mean and variance estimated.
inline AndersonDarlingResult anderson_darling_normal(std::vector<double> v) {
  if (v.size() < 8) throw std::invalid_argument("Anderson-Darling needs at least 8 samples");
  const double m = mean(v);
  const double sd = std::sqrt(variance(v));
  if (!(sd > 0.0)) return {std::numeric_limits<double>::infinity(), true};
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double zi = (v[i] - m) / sd;
    const double zr = (v[v.size() - 1 - i] - m) / sd;
    const double fi = 0.5 * std::erfc(-zi / std::sqrt(2.0));
    const double fr = 0.5 * std::erfc(zr / std::sqrt(2.0));  // 1 - Phi(z_{n+1-i})
    s += (2.0 * static_cast<double>(i) + 1.0) * (std::log(fi) + std::log(fr));
  }
  const double a2 = -n - s / n;
  AndersonDarlingResult r;
  r.statistic = a2 * (1.0 + 0.75 / n + 2.25 / (n * n));
  r.reject_1pct = r.statistic > 1.035;
  return r;
}

struct Histogram {
  double lo = 0.0, hi = 1.0;
  std::vector<std::size_t> counts;

  double width() const noexcept { return (hi - lo) / static_cast<double>(counts.size()); }
};

/// Equal-width bins on [lo, hi]; values outside are clamped to the end bins.
inline Histogram histogram(const std::vector<double>& v, std::size_t bins, double lo = 0.0, double hi = 1.0) {
  if (bins == 0 || !(hi > lo)) throw std::invalid_argument("histogram needs bins > 0 and hi > lo");
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
  for (double x : v) {
    auto b = static_cast<long long>(std::floor((x - lo) / (hi - lo) * static_cast<double>(bins)));
    b = std::clamp<long long>(b, 0, static_cast<long long>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

}  // namespace defclust::stats
