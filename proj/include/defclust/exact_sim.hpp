#pragma once

// Monte Carlo of the full N-name system.
//
// Intensities follow a full-truncation Euler scheme
//
//   l <- l + alpha (lbar - l+) dt + sigma sqrt(l+) dW + beta_s l+ eps dX,
//
// and the effective intensity of a surviving name is l+ = max(l, 0). Over a
// step the compensator of each survivor grows at rate l+. A name defaults when
// its compensator reaches its exponential(1) threshold. Crossings inside a
// step are resolved in time order: each default raises every surviving
// intensity by beta_c / N for the remainder of the step, and the scan repeats
// until no survivor crosses before the step ends.
//
// The optional intensity twist superimposes a pool-wide default clock of rate
// beta N until the target-th default. A twist-clock event defaults survivor n
// with probability l_n+ / sum l+, so each name's intensity is scaled by the
// common factor theta = 1 + beta N / sum l+ and the path weight
//
//   log dP/dQ = beta N S_target - sum_{k <= target} log(theta_{S_k-})
//
// is the exact likelihood ratio of the discretised model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "defclust/errors.hpp"
#include "defclust/factor_path.hpp"
#include "defclust/model.hpp"
#include "defclust/parallel.hpp"
#include "defclust/rng.hpp"

namespace defclust {

struct DefaultEvent {
  double time = 0.0;
  std::size_t name = 0;
};

struct LossPath {
  TimeGrid grid;
  std::size_t n_names = 0;
  std::vector<double> losses;  // L^N(t_k), k = 0..M
  std::vector<DefaultEvent> default_times;

  double terminal() const noexcept { return losses.back(); }
};

struct SystemState {
  double t = 0.0;
  std::vector<double> lambdas;  // effective intensities max(l, 0)
  std::vector<std::uint8_t> alive;
  std::vector<double> compensators;
  std::vector<double> thresholds;
  double x = 0.0;
};

struct IntensityTwist {
  double beta = 0.0;
  std::size_t target_defaults = 0;
  bool stop_at_target = true;  // skip the rest of the path once the target is hit
};

struct PathOptions {
  bool record_states = false;
  std::optional<IntensityTwist> twist;
};

struct PathResult {
  LossPath path;
  std::vector<SystemState> states;
  double log_weight = 0.0;  // log dP/dQ, zero without a twist
  bool reached_target = false;
  bool stopped_early = false;  // losses after the stop are held flat
  bool degenerate = false;     // twist event with zero natural intensity
};

/// Warnings about grid resolution (alpha dt >= 1 for some group).
inline std::vector<std::string> grid_warnings(const PoolSpec& pool, const TimeGrid& grid) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < pool.groups.size(); ++i) {
    if (pool.groups[i].params.alpha * grid.dt() >= 1.0)
      out.push_back("groups[" + std::to_string(i) + "]: alpha*dt >= 1, refine the grid");
  }
  return out;
}

/// Number of defaults needed for L^N >= ell.
inline std::size_t defaults_for_level(double ell, std::size_t n_names) {
  const double x = ell * static_cast<double>(n_names);
  return static_cast<std::size_t>(std::max(0.0, std::ceil(x - 1e-9)));
}

class PoolSimulator {
 public:
  PoolSimulator(const PoolSpec& pool, const FactorSpec& factor, const TimeGrid& grid)
      : factor_(factor), grid_(grid), n_(pool.n_names) {
    const auto names = expand_pool(pool);
    const auto v = validate_factor(factor);
    if (!v.empty()) throw std::invalid_argument(v.front().field + ": " + v.front().message);
    lambda0_.reserve(n_);
    for (const auto& p : names) {
      lambda0_.push_back(p.lambda0);
      alpha_.push_back(p.alpha);
      lambda_bar_.push_back(p.lambda_bar);
      sigma_.push_back(p.sigma);
      jump_.push_back(p.beta_c / static_cast<double>(n_));
      beta_s_.push_back(p.beta_s);
    }
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t n_names() const noexcept { return n_; }

  PathResult simulate(StreamKey key, const PathOptions& opts = {}) const {
    return simulate(key, simulate_factor_path(factor_, grid_, key), opts);
  }

  PathResult simulate(StreamKey key, const FactorPath& xpath, const PathOptions& opts) const {
    const std::size_t n = n_;
    const double dt = grid_.dt();
    const double sqdt = std::sqrt(dt);
    const double eps = factor_.kind == FactorKind::none ? 0.0 : factor_.epsilon;

    RandomStream noise(key, Substream::names);
    RandomStream thresholds(key, Substream::thresholds);
    RandomStream twist_rng(key, Substream::twist);

    std::vector<double> lam(lambda0_);
    std::vector<double> rate(n);
    std::vector<double> comp(n, 0.0);
    std::vector<double> thr(n);
    std::vector<std::uint8_t> alive(n, 1);
    std::vector<std::uint32_t> survivors(n);
    for (std::size_t i = 0; i < n; ++i) {
      thr[i] = thresholds.exponential();
      survivors[i] = static_cast<std::uint32_t>(i);
    }

    PathResult out;
    out.path.grid = grid_;
    out.path.n_names = n;
    out.path.losses.assign(grid_.size(), 0.0);
    out.path.default_times.reserve(n);

    const bool twisted = opts.twist.has_value() && opts.twist->beta > 0.0;
    const std::size_t target = opts.twist ? opts.twist->target_defaults : 0;
    const double twist_rate = twisted ? opts.twist->beta * static_cast<double>(n) : 0.0;
    bool twist_on = twisted && target > 0;
    double twist_gap = twist_on ? twist_rng.exponential() : 0.0;
    if (opts.twist && target == 0) out.reached_target = true;

    auto record = [&](std::size_t k) {
      SystemState s;
      s.t = grid_.time(k);
      s.lambdas.resize(n);
      for (std::size_t i = 0; i < n; ++i) s.lambdas[i] = std::max(lam[i], 0.0);
      s.alive = alive;
      s.compensators = comp;
      s.thresholds = thr;
      s.x = xpath.x[k];
      out.states.push_back(std::move(s));
    };
    if (opts.record_states) record(0);

    std::size_t n_defaults = 0;
    for (std::size_t k = 0; k < grid_.n_steps; ++k) {
      const double t0 = grid_.time(k);
      const double edx = eps * xpath.dx(k);

      for (const std::uint32_t i : survivors) {
        const double lp = std::max(lam[i], 0.0);
        const double z = noise.normal();
        lam[i] += alpha_[i] * (lambda_bar_[i] - lp) * dt + sigma_[i] * std::sqrt(lp) * sqdt * z +
                  beta_s_[i] * lp * edx;
        if (!std::isfinite(lam[i]))
          throw NumericalError("non-finite intensity for name " + std::to_string(i) + " at t=" +
                               std::to_string(t0));
        rate[i] = std::max(lam[i], 0.0);
      }

      double remaining = dt;
      double elapsed = 0.0;
      for (;;) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t victim = n;
        double total_rate = 0.0;
        for (const std::uint32_t i : survivors) {
          const double r = rate[i];
          total_rate += r;
          if (r > 0.0) {
            const double tau = (thr[i] - comp[i]) / r;
            if (tau < best) {
              best = tau;
              victim = i;
            }
          }
        }
        bool twist_event = false;
        if (twist_on) {
          const double tau = twist_gap / twist_rate;
          if (tau < best) {
            best = tau;
            twist_event = true;
          }
        }
        if (!(best <= remaining)) {
          for (const std::uint32_t i : survivors) comp[i] += rate[i] * remaining;
          if (twist_on) twist_gap -= twist_rate * remaining;
          break;
        }
        best = std::max(best, 0.0);
        for (const std::uint32_t i : survivors) comp[i] += rate[i] * best;
        if (twist_on && !twist_event) twist_gap -= twist_rate * best;
        remaining -= best;
        elapsed += best;
        const double t_event = t0 + elapsed;

        if (twist_event) {
          twist_gap = 0.0;
          if (total_rate <= 0.0) {
            out.degenerate = true;
            out.log_weight = -std::numeric_limits<double>::infinity();
            out.stopped_early = true;
            fill_flat(out.path.losses, k + 1, n_defaults, n);
            return out;
          }
          double u = twist_rng.uniform() * total_rate;
          victim = n;
          for (const std::uint32_t i : survivors) {
            if (rate[i] <= 0.0) continue;
            victim = i;
            u -= rate[i];
            if (u < 0.0) break;
          }
        } else {
          comp[victim] = thr[victim];
        }

        if (twist_on) {
          out.log_weight -= std::log1p(twist_rate / total_rate);
          if (twist_event) twist_gap = twist_rng.exponential();
        }

        alive[victim] = 0;
        survivors.erase(std::lower_bound(survivors.begin(), survivors.end(),
                                         static_cast<std::uint32_t>(victim)));
        out.path.default_times.push_back({t_event, victim});
        ++n_defaults;
        for (const std::uint32_t i : survivors) {
          lam[i] += jump_[i];
          rate[i] = std::max(lam[i], 0.0);
        }

        if (opts.twist && !out.reached_target && n_defaults >= target) {
          out.reached_target = true;
          if (twist_on) {
            out.log_weight += twist_rate * t_event;
            twist_on = false;
          }
          if (opts.twist->stop_at_target) {
            out.stopped_early = true;
            fill_flat(out.path.losses, k + 1, n_defaults, n);
            return out;
          }
        }
        if (survivors.empty()) break;
      }

      out.path.losses[k + 1] = static_cast<double>(n_defaults) / static_cast<double>(n);
      if (opts.record_states) record(k + 1);
      if (survivors.empty()) {
        fill_flat(out.path.losses, k + 1, n_defaults, n);
        if (opts.record_states)
          for (std::size_t j = k + 2; j < grid_.size(); ++j) record(j);
        break;
      }
    }
    if (twist_on) out.log_weight += twist_rate * grid_.horizon;
    return out;
  }

 private:
  static void fill_flat(std::vector<double>& losses, std::size_t from, std::size_t defaults, std::size_t n) {
    for (std::size_t j = from; j < losses.size(); ++j)
      losses[j] = static_cast<double>(defaults) / static_cast<double>(n);
  }

  FactorSpec factor_;
  TimeGrid grid_;
  std::size_t n_;
  std::vector<double> lambda0_, alpha_, lambda_bar_, sigma_, jump_, beta_s_;
};

inline PathResult simulate_path(const PoolSpec& pool, const FactorSpec& factor, const TimeGrid& grid,
                                StreamKey key, const PathOptions& opts = {}) {
  return PoolSimulator(pool, factor, grid).simulate(key, opts);
}

struct Ensemble {
  std::size_t n_names = 0;
  std::vector<std::size_t> report_steps;
  std::vector<std::vector<double>> samples;  // [report index][path]
  std::vector<double> terminal;              // L^N_T per path
  std::vector<std::size_t> histogram;        // paths with exactly j defaults at T, j = 0..N

  double mean_terminal() const {
    double s = 0.0;
    for (double v : terminal) s += v;
    return s / static_cast<double>(terminal.size());
  }
};

/// n_paths independent paths; path j reads stream seed.stream(j).
inline Ensemble simulate_ensemble(const PoolSpec& pool, const FactorSpec& factor, const TimeGrid& grid,
                                  std::size_t n_paths, const SeedSpec& seed,
                                  std::vector<std::size_t> report_steps = {}) {
  if (n_paths == 0) throw std::invalid_argument("n_paths must be at least 1");
  for (auto s : report_steps)
    if (s > grid.n_steps) throw std::invalid_argument("report step outside the grid");

  const PoolSimulator sim(pool, factor, grid);
  std::vector<std::vector<double>> per_path(n_paths);
  parallel_for(n_paths, [&](std::size_t j) {
    const auto r = sim.simulate(seed.stream(j));
    auto& row = per_path[j];
    row.reserve(report_steps.size() + 1);
    for (auto s : report_steps) row.push_back(r.path.losses[s]);
    row.push_back(r.path.terminal());
  });

  Ensemble e;
  e.n_names = pool.n_names;
  e.report_steps = std::move(report_steps);
  e.samples.assign(e.report_steps.size(), std::vector<double>(n_paths));
  e.terminal.resize(n_paths);
  e.histogram.assign(pool.n_names + 1, 0);
  for (std::size_t j = 0; j < n_paths; ++j) {
    for (std::size_t r = 0; r < e.report_steps.size(); ++r) e.samples[r][j] = per_path[j][r];
    e.terminal[j] = per_path[j].back();
    const auto count = static_cast<std::size_t>(std::llround(e.terminal[j] * static_cast<double>(pool.n_names)));
    ++e.histogram[count];
  }
  return e;
}

}  // namespace defclust
