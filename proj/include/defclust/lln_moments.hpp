#pragma once

// Law-of-large-numbers limit of the loss through the truncated moment system
// of the limiting survivor measure. For each type i and k = 0..K
//
//   du_k = [u_k (-alpha k + e bS b0(X) k + (e bS s0(X))^2 k (k-1) / 2)
//           + u_{k-1} (sigma^2 k (k-1) / 2 + alpha lbar k + bC k ubar_1)
//           - u_{k+1}] dt + e bS s0(X) k u_k dV,
//
// where ubar_1 sums u_1 over all types, u_{K+1} = u_K and u_k(0) = w_i l0^k.
// The limiting loss is 1 - sum_i u_0.
//
// Each grid step is split: the factor-driven diagonal part has the exact
// solution u_k exp(e bS k dX - (e bS s0)^2 k dt / 2), and the remaining
// deterministic system is advanced by RK4 with substeps.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "defclust/errors.hpp"
#include "defclust/factor_path.hpp"
#include "defclust/model.hpp"
#include "defclust/parallel.hpp"

namespace defclust {

class LlnStepper {
 public:
  LlnStepper(const PoolSpec& pool, const FactorSpec& factor, std::size_t order)
      : factor_(factor), order_(order) {
    if (order < 2) throw std::invalid_argument("moment truncation order must be at least 2");
    require_valid(pool);
    for (const auto& g : pool.groups) {
      types_.push_back(g.params);
      weights_.push_back(g.weight);
    }
  }

  std::size_t order() const noexcept { return order_; }
  std::size_t n_types() const noexcept { return types_.size(); }
  std::size_t width() const noexcept { return types_.size() * (order_ + 1); }
  const TypeParams& type(std::size_t i) const noexcept { return types_[i]; }

  std::vector<double> initial_state() const {
    std::vector<double> u(width());
    for (std::size_t i = 0; i < types_.size(); ++i) {
      double v = weights_[i];
      for (std::size_t k = 0; k <= order_; ++k, v *= types_[i].lambda0) u[i * (order_ + 1) + k] = v;
    }
    return u;
  }

  double ubar1(std::span<const double> u) const noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < types_.size(); ++i) s += u[i * (order_ + 1) + 1];
    return s;
  }

  double loss(std::span<const double> u) const noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < types_.size(); ++i) s += u[i * (order_ + 1)];
    return 1.0 - s;
  }

  /// One grid step given the factor value x at the left end and its increment
  /// dx. A step that leaves the admissible set (a negative moment, or u_0
  /// increasing) is retried with more substeps. If that fails the state is
  /// projected onto a valid moment sequence and the step is retried once more;
  /// the step then reports true. A negative survivor mass that survives this
  /// is a numerical failure.
  bool step(std::span<double> u, double x, double dx, double dt) const {
    if (factor_.active()) apply_factor(u, x, dx, dt);
    std::vector<double> saved(u.begin(), u.end());
    std::size_t n_sub = substeps(u, dt);
    for (int attempt = 0; attempt < 4; ++attempt, n_sub *= 4) {
      std::copy(saved.begin(), saved.end(), u.begin());
      integrate(u, dt, n_sub);
      if (admissible(saved, u)) return false;
    }
    project(saved);
    std::copy(saved.begin(), saved.end(), u.begin());
    integrate(u, dt, std::max(n_sub, substeps(u, dt)));
    if (!admissible(saved, u)) {
      const std::size_t w = order_ + 1;
      for (std::size_t i = 0; i < types_.size(); ++i) {
        if (!(u[i * w] >= 0.0))
          throw NumericalError("negative survivor mass u_0 for type " + std::to_string(i) +
                               "; refine the time grid");
        u[i * w] = std::min(u[i * w], saved[i * w]);
      }
      project(u);
    }
    return true;
  }

  /// Keeps, per type, the longest prefix u_0..u_j that is positive with
  /// nondecreasing ratios u_k / u_{k-1} (log-convex, as moments of a measure
  /// on [0, inf) must be) and continues it geometrically with the last ratio.
  void project(std::span<double> u) const {
    const std::size_t w = order_ + 1;
    for (std::size_t i = 0; i < types_.size(); ++i) {
      double* v = u.data() + i * w;
      v[0] = std::max(v[0], 0.0);
      if (!(v[0] > 0.0) || !(v[1] > 0.0)) {
        std::fill(v + 1, v + w, 0.0);
        continue;
      }
      double ratio = v[1] / v[0];
      std::size_t k = 2;
      for (; k < w; ++k) {
        if (!(v[k] > 0.0) || !std::isfinite(v[k])) break;
        const double r = v[k] / v[k - 1];
        if (r < ratio) break;
        ratio = r;
      }
      for (; k < w; ++k) v[k] = v[k - 1] * ratio;
    }
  }

 private:
  void apply_factor(std::span<double> u, double x, double dx, double dt) const {
    const double s0 = factor_.diffusion(x);
    for (std::size_t i = 0; i < types_.size(); ++i) {
      const double b = factor_.epsilon * types_[i].beta_s;
      const double log_growth = b * dx - 0.5 * b * b * s0 * s0 * dt;
      const double g = std::exp(log_growth);
      double mult = 1.0;
      for (std::size_t k = 0; k <= order_; ++k) {
        u[i * (order_ + 1) + k] *= mult;
        mult *= g;
      }
    }
  }

  std::size_t substeps(std::span<const double> u, double dt) const {
    const auto K = static_cast<double>(order_);
    const double ub = std::max(0.0, ubar1(u));
    double stiff = 1.0;
    for (const auto& p : types_) {
      const double lower = p.alpha * p.lambda_bar * K + std::abs(p.beta_c) * K * ub + 0.5 * p.sigma * p.sigma * K * (K - 1.0);
      stiff = std::max(stiff, p.alpha * K + std::sqrt(lower) + 1.0);
    }
    // -u_{k+1} acts on u_k at the rate u_{k+1} / u_k, the typical intensity
    for (std::size_t i = 0; i < types_.size(); ++i)
      for (std::size_t k = 0; k < order_; ++k) {
        const double a = u[i * (order_ + 1) + k], b = u[i * (order_ + 1) + k + 1];
        if (a > 0.0 && b > 0.0) stiff = std::max(stiff, 2.0 * b / a);
      }
    return static_cast<std::size_t>(std::max(1.0, std::ceil(dt * stiff / 0.5)));
  }

  /// Moments nonnegative, survivor mass nonincreasing.
  bool admissible(std::span<const double> before, std::span<const double> u) const noexcept {
    for (std::size_t i = 0; i < types_.size(); ++i) {
      const std::size_t i0 = i * (order_ + 1);
      if (!(u[i0] <= before[i0] * (1.0 + 1e-12) + 1e-300)) return false;
      const double scale = std::max(1e-300, std::abs(u[i0]));
      for (std::size_t k = 0; k <= order_; ++k) {
        const double v = u[i * (order_ + 1) + k];
        if (!(v >= -1e-12 * scale)) return false;
      }
    }
    return true;
  }

  void rhs(const double* u, double* du) const noexcept {
    const std::size_t w = order_ + 1;
    double ub = 0.0;
    for (std::size_t i = 0; i < types_.size(); ++i) ub += u[i * w + 1];
    for (std::size_t i = 0; i < types_.size(); ++i) {
      const auto& p = types_[i];
      const double* v = u + i * w;
      double* dv = du + i * w;
      const double lin = p.alpha * p.lambda_bar + p.beta_c * ub;
      const double half_s2 = 0.5 * p.sigma * p.sigma;
      dv[0] = -v[1];
      for (std::size_t k = 1; k <= order_; ++k) {
        const auto kd = static_cast<double>(k);
        const double next = k < order_ ? v[k + 1] : v[order_];
        dv[k] = -p.alpha * kd * v[k] + (lin * kd + half_s2 * kd * (kd - 1.0)) * v[k - 1] - next;
      }
    }
  }

  void integrate(std::span<double> u, double dt, std::size_t n_sub) const {
    const std::size_t w = u.size();
    std::vector<double> buf(5 * w);
    double *a = buf.data(), *b = a + w, *c = b + w, *d = c + w, *t = d + w;
    const double h = dt / static_cast<double>(n_sub);
    for (std::size_t s = 0; s < n_sub; ++s) {
      rhs(u.data(), a);
      for (std::size_t k = 0; k < w; ++k) t[k] = u[k] + 0.5 * h * a[k];
      rhs(t, b);
      for (std::size_t k = 0; k < w; ++k) t[k] = u[k] + 0.5 * h * b[k];
      rhs(t, c);
      for (std::size_t k = 0; k < w; ++k) t[k] = u[k] + h * c[k];
      rhs(t, d);
      for (std::size_t k = 0; k < w; ++k) u[k] += h / 6.0 * (a[k] + 2.0 * b[k] + 2.0 * c[k] + d[k]);
    }
  }

  FactorSpec factor_;
  std::size_t order_;
  std::vector<TypeParams> types_;
  std::vector<double> weights_;
};

/// Moment trajectory, row-major as [grid index][type][k].
struct MomentTrajectory {
  TimeGrid grid;
  std::size_t n_types = 0;
  std::size_t order = 0;
  std::vector<double> u;
  std::vector<double> losses;  // L(t_j)
  std::vector<double> x;       // factor values used
  std::size_t projected_steps = 0;

  double operator()(std::size_t j, std::size_t type, std::size_t k) const noexcept {
    return u[(j * n_types + type) * (order + 1) + k];
  }
  std::span<const double> at(std::size_t j) const noexcept {
    const std::size_t w = n_types * (order + 1);
    return {u.data() + j * w, w};
  }
  double terminal_loss() const noexcept { return losses.back(); }
};

/// Solves the moment system along one factor path. Without an explicit path
/// the factor is simulated from `key`, so the result is driven by the same
/// factor realisation as exact simulation of path `key`.
inline MomentTrajectory solve_lln(const PoolSpec& pool, const FactorSpec& factor, const TimeGrid& grid,
                                  std::size_t order, const std::optional<FactorPath>& x_path = std::nullopt,
                                  StreamKey key = {}) {
  const LlnStepper stepper(pool, factor, order);
  const FactorPath xp = x_path ? *x_path : simulate_factor_path(factor, grid, key);
  if (xp.x.size() != grid.size()) throw std::invalid_argument("factor path does not match the grid");

  MomentTrajectory out;
  out.grid = grid;
  out.n_types = stepper.n_types();
  out.order = order;
  out.x = xp.x;
  const std::size_t w = stepper.width();
  out.u.resize(grid.size() * w);
  out.losses.resize(grid.size());

  auto state = stepper.initial_state();
  std::copy(state.begin(), state.end(), out.u.begin());
  out.losses[0] = stepper.loss(state);
  for (std::size_t j = 0; j < grid.n_steps; ++j) {
    out.projected_steps += stepper.step(state, xp.x[j], xp.dx(j), grid.dt());
    std::copy(state.begin(), state.end(), out.u.begin() + static_cast<std::ptrdiff_t>((j + 1) * w));
    out.losses[j + 1] = stepper.loss(state);
  }
  return out;
}

/// Terminal limiting losses, one per simulated factor path; path j uses the
/// factor realisation of stream seed.stream(j).
struct LlnSamples {
  std::vector<double> terminal;
  std::size_t projected_paths = 0;  // paths on which moments were projected

  double mean() const {
    double s = 0.0;
    for (double v : terminal) s += v;
    return s / static_cast<double>(terminal.size());
  }
};

inline LlnSamples lln_loss_distribution(const PoolSpec& pool, const FactorSpec& factor, const TimeGrid& grid,
                                        std::size_t order, std::size_t n_paths, const SeedSpec& seed) {
  if (n_paths == 0) throw std::invalid_argument("n_paths must be at least 1");
  const LlnStepper stepper(pool, factor, order);
  LlnSamples out;
  out.terminal.resize(n_paths);
  std::vector<std::uint8_t> projected(n_paths, 0);
  parallel_for(n_paths, [&](std::size_t j) {
    const auto xp = simulate_factor_path(factor, grid, seed.stream(j));
    auto state = stepper.initial_state();
    bool p = false;
    for (std::size_t k = 0; k < grid.n_steps; ++k) p |= stepper.step(state, xp.x[k], xp.dx(k), grid.dt());
    out.terminal[j] = stepper.loss(state);
    projected[j] = p;
  });
  for (auto p : projected) out.projected_paths += p;
  return out;
}

}  // namespace defclust
