#pragma once

// Domain types shared by every module: name parameters, pools of typed names,
// the systematic factor, the time grid and the seed specification.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "defclust/rng.hpp"

namespace defclust {

/// Per-name parameters (lambda0, alpha, lambda_bar, sigma, beta_c, beta_s).
struct TypeParams {
  double lambda0 = 0.0;     // initial intensity
  double alpha = 0.0;       // mean-reversion speed
  double lambda_bar = 0.0;  // reversion level
  double sigma = 0.0;       // square-root diffusion coefficient
  double beta_c = 0.0;      // contagion sensitivity (jump per unit of loss)
  double beta_s = 0.0;      // systematic sensitivity

  friend bool operator==(const TypeParams&, const TypeParams&) = default;
};

struct PoolGroup {
  TypeParams params;
  double weight = 1.0;

  friend bool operator==(const PoolGroup&, const PoolGroup&) = default;
};

/// Finite mixture of name types plus the pool size N.
struct PoolSpec {
  std::vector<PoolGroup> groups;
  std::size_t n_names = 1;

  bool homogeneous() const noexcept { return groups.size() == 1; }
};

struct Violation {
  std::string field;
  std::string message;
};

namespace detail {

inline std::string format_number(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

}  // namespace detail

/// Returns every invariant violation of the pool; an empty list means valid.
inline std::vector<Violation> validate_pool(const PoolSpec& spec) {
  std::vector<Violation> out;
  if (spec.n_names == 0) out.push_back({"n_names", "must be a positive integer"});
  if (spec.groups.empty()) out.push_back({"groups", "at least one group is required"});

  double total = 0.0;
  for (std::size_t i = 0; i < spec.groups.size(); ++i) {
    const auto& g = spec.groups[i];
    const std::string base = "groups[" + std::to_string(i) + "]";
    if (!std::isfinite(g.weight) || g.weight <= 0.0 || g.weight > 1.0)
      out.push_back({base + ".weight", "must lie in (0, 1], got " + detail::format_number(g.weight)});
    total += g.weight;

    const auto& p = g.params;
    const std::pair<const char*, double> fields[] = {
        {"lambda0", p.lambda0}, {"alpha", p.alpha},   {"lambda_bar", p.lambda_bar},
        {"sigma", p.sigma},     {"beta_c", p.beta_c}, {"beta_s", p.beta_s}};
    for (const auto& [name, value] : fields) {
      if (!std::isfinite(value)) {
        out.push_back({base + ".params." + name, "must be finite"});
      }
    }
    const std::pair<const char*, double> nonneg[] = {
        {"lambda0", p.lambda0}, {"alpha", p.alpha}, {"lambda_bar", p.lambda_bar}, {"sigma", p.sigma}};
    for (const auto& [name, value] : nonneg) {
      if (std::isfinite(value) && value < 0.0)
        out.push_back({base + ".params." + name,
                       "must be nonnegative, got " + detail::format_number(value)});
    }
  }
  if (!spec.groups.empty() && std::abs(total - 1.0) > 1e-12)
    out.push_back({"groups", "weights sum to " + detail::format_number(total)});
  return out;
}

/// Non-fatal remarks about a pool (negative contagion sensitivities).
inline std::vector<std::string> pool_warnings(const PoolSpec& spec) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < spec.groups.size(); ++i) {
    if (spec.groups[i].params.beta_c < 0.0)
      out.push_back("groups[" + std::to_string(i) + "].params.beta_c is negative");
  }
  return out;
}

inline void require_valid(const PoolSpec& spec) {
  auto v = validate_pool(spec);
  if (!v.empty()) throw std::invalid_argument("invalid pool: " + v.front().field + ": " + v.front().message);
}

/// Names per group: ceil(w_i N - 1/2) (halves round down), with the signed
/// remainder assigned to the group of largest weight (lowest index on ties).
inline std::vector<std::size_t> group_counts(const PoolSpec& spec) {
  require_valid(spec);
  const auto n = static_cast<double>(spec.n_names);
  std::vector<long long> counts(spec.groups.size());
  long long assigned = 0;
  std::size_t largest = 0;
  for (std::size_t i = 0; i < spec.groups.size(); ++i) {
    counts[i] = static_cast<long long>(std::ceil(spec.groups[i].weight * n - 0.5));
    assigned += counts[i];
    if (spec.groups[i].weight > spec.groups[largest].weight) largest = i;
  }
  counts[largest] += static_cast<long long>(spec.n_names) - assigned;
  if (counts[largest] < 0) throw std::invalid_argument("pool too small for its group weights");
  return {counts.begin(), counts.end()};
}

/// Per-name parameters, group-major.
inline std::vector<TypeParams> expand_pool(const PoolSpec& spec) {
  const auto counts = group_counts(spec);
  std::vector<TypeParams> names;
  names.reserve(spec.n_names);
  for (std::size_t i = 0; i < counts.size(); ++i)
    names.insert(names.end(), counts[i], spec.groups[i].params);
  return names;
}

/// Group index of each name, in the order produced by expand_pool.
inline std::vector<std::size_t> name_groups(const PoolSpec& spec) {
  const auto counts = group_counts(spec);
  std::vector<std::size_t> out;
  out.reserve(spec.n_names);
  for (std::size_t i = 0; i < counts.size(); ++i) out.insert(out.end(), counts[i], i);
  return out;
}

// ---------------------------------------------------------------------------

enum class FactorKind { none, ou, cir };

/// Systematic factor dX = b0(X) dt + sigma0(X) dV with coupling scale epsilon.
///
/// OU:  b0(x) = -speed (x - level), sigma0(x) = vol
/// CIR: b0(x) =  speed (level - x), sigma0(x) = vol sqrt(max(x, 0))
struct FactorSpec {
  FactorKind kind = FactorKind::none;
  double speed = 0.0;
  double level = 0.0;
  double vol = 0.0;
  double x0 = 0.0;
  double epsilon = 0.0;

  static FactorSpec none() { return {}; }
  static FactorSpec ou(double gamma, double vol, double mean, double x0, double epsilon) {
    return {FactorKind::ou, gamma, mean, vol, x0, epsilon};
  }
  static FactorSpec cir(double speed, double level, double vol, double x0, double epsilon) {
    return {FactorKind::cir, speed, level, vol, x0, epsilon};
  }

  double drift(double x) const noexcept {
    switch (kind) {
      case FactorKind::ou: return -speed * (x - level);
      case FactorKind::cir: return speed * (level - x);
      default: return 0.0;
    }
  }

  double diffusion(double x) const noexcept {
    switch (kind) {
      case FactorKind::ou: return vol;
      case FactorKind::cir: return vol * std::sqrt(std::max(x, 0.0));
      default: return 0.0;
    }
  }

  bool active() const noexcept { return kind != FactorKind::none && epsilon != 0.0; }
};

inline std::vector<Violation> validate_factor(const FactorSpec& f) {
  std::vector<Violation> out;
  for (auto [name, v] : {std::pair{"speed", f.speed}, std::pair{"level", f.level},
                         std::pair{"vol", f.vol}, std::pair{"x0", f.x0},
                         std::pair{"epsilon", f.epsilon}}) {
    if (!std::isfinite(v)) out.push_back({std::string("factor.") + name, "must be finite"});
  }
  if (f.epsilon < 0.0) out.push_back({"factor.epsilon", "must be nonnegative"});
  if (f.kind == FactorKind::none && f.epsilon != 0.0)
    out.push_back({"factor.epsilon", "must be 0 when kind is none"});
  if (f.kind != FactorKind::none && f.vol < 0.0) out.push_back({"factor.vol", "must be nonnegative"});
  return out;
}

/// epsilon_N = 1/sqrt(N), the scaling used for the three-type test pool.
inline double epsilon_inverse_sqrt(std::size_t n_names) {
  return 1.0 / std::sqrt(static_cast<double>(n_names));
}

// ---------------------------------------------------------------------------

/// Uniform grid t_k = k T / M, k = 0..M.
struct TimeGrid {
  double horizon = 1.0;
  std::size_t n_steps = 500;

  TimeGrid() = default;
  TimeGrid(double horizon_, std::size_t n_steps_) : horizon(horizon_), n_steps(n_steps_) {
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw std::invalid_argument("grid horizon must be positive");
    if (n_steps_ == 0) throw std::invalid_argument("grid needs at least one step");
  }

  double dt() const noexcept { return horizon / static_cast<double>(n_steps); }
  double time(std::size_t k) const noexcept {
    return k == n_steps ? horizon : static_cast<double>(k) * dt();
  }
  std::size_t size() const noexcept { return n_steps + 1; }

  /// Index of the grid point closest to t (clamped to the grid).
  std::size_t index_of(double t) const noexcept {
    if (t <= 0.0) return 0;
    const double k = std::round(t / dt());
    return k >= static_cast<double>(n_steps) ? n_steps : static_cast<std::size_t>(k);
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// Master seed plus run index; path j of the run reads stream (seed, run, j).
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint32_t run = 0;

  StreamKey stream(std::size_t path) const noexcept {
    return {master_seed, run, static_cast<std::uint32_t>(path)};
  }
  SeedSpec with_run(std::uint32_t r) const noexcept { return {master_seed, r}; }
};

}  // namespace defclust
