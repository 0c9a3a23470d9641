#pragma once

// Survival function and default-time density of a single name whose intensity
// is driven by deterministic forcing paths (phi, psi):
//
//   dl = -alpha (l - lbar) dt + sigma sqrt(l) dW + beta_c dphi + beta_s l dpsi.
//
// The exponential moments m_k(t) = E[l_t^k exp(-int_0^t l_s ds)] solve
//
//   m_k' = (-alpha k + beta_s psi' k) m_k
//          + (alpha lbar k + beta_c phi' k + sigma^2 k (k-1) / 2) m_{k-1} - m_{k+1},
//
// truncated at order K with m_{K+1} = m_K. Then S = m_0 and f = m_1.
// Forcing derivatives are constant on each grid step.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "defclust/model.hpp"

namespace defclust {

struct ForcedPaths {
  TimeGrid grid;
  std::vector<double> phi;  // phi(t_k), phi(0) = 0, nondecreasing
  std::vector<double> psi;  // psi(t_k), psi(0) = 0

  static ForcedPaths zero(const TimeGrid& grid) {
    return {grid, std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0)};
  }

  /// phi(t) = phi_rate t, psi(t) = psi_rate t.
  static ForcedPaths linear(const TimeGrid& grid, double phi_rate, double psi_rate = 0.0) {
    ForcedPaths p = zero(grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      p.phi[k] = phi_rate * grid.time(k);
      p.psi[k] = psi_rate * grid.time(k);
    }
    return p;
  }

  double phi_rate(std::size_t k) const noexcept { return (phi[k + 1] - phi[k]) / grid.dt(); }
  double psi_rate(std::size_t k) const noexcept { return (psi[k + 1] - psi[k]) / grid.dt(); }
};

inline void validate_forcing(const ForcedPaths& f) {
  if (f.phi.size() != f.grid.size() || f.psi.size() != f.grid.size())
    throw std::invalid_argument("forcing paths must have one value per grid point");
  if (f.phi.front() != 0.0 || f.psi.front() != 0.0)
    throw std::invalid_argument("forcing paths must start at 0");
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    if (!std::isfinite(f.phi[k]) || !std::isfinite(f.psi[k]))
      throw std::invalid_argument("forcing paths must be finite");
    if (k > 0 && f.phi[k] < f.phi[k - 1] - 1e-14)
      throw std::invalid_argument("phi must be nondecreasing");
  }
}

/// Fourth-order Runge-Kutta integrator for the truncated exponential-moment
/// system of one name type. Substeps are chosen from the stiffness of the
/// step so that h times the dominant rate stays below one half.
class ExpMomentIntegrator {
 public:
  ExpMomentIntegrator(const TypeParams& p, std::size_t order) : p_(p), order_(order) {
    if (order < 2) throw std::invalid_argument("moment truncation order must be at least 2");
  }

  std::size_t order() const noexcept { return order_; }
  std::size_t width() const noexcept { return order_ + 1; }

  std::vector<double> initial_state() const {
    std::vector<double> m(width());
    double v = 1.0;
    for (std::size_t k = 0; k <= order_; ++k, v *= p_.lambda0) m[k] = v;
    return m;
  }

  /// Number of RK4 substeps used for a grid step of length dt.
  std::size_t substeps(double phi_rate, double psi_rate, double dt) const noexcept {
    const auto K = static_cast<double>(order_);
    const double lower = p_.alpha * p_.lambda_bar * K + std::abs(p_.beta_c * phi_rate) * K +
                         0.5 * p_.sigma * p_.sigma * K * (K - 1.0);
    const double stiff = p_.alpha * K + std::abs(p_.beta_s * psi_rate) * K + std::sqrt(lower) + 1.0;
    return static_cast<std::size_t>(std::max(1.0, std::ceil(dt * stiff / 0.5)));
  }

  /// Advances m over one grid step of length dt with constant forcing rates.
  void advance(std::span<double> m, double phi_rate, double psi_rate, double dt) const {
    const std::size_t n_sub = substeps(phi_rate, psi_rate, dt);
    const double h = dt / static_cast<double>(n_sub);

    const std::size_t w = width();
    double k1[64], k2[64], k3[64], k4[64], tmp[64];
    std::vector<double> heap;
    double *a = k1, *b = k2, *c = k3, *d = k4, *t = tmp;
    if (w > 64) {
      heap.resize(5 * w);
      a = heap.data();
      b = a + w;
      c = b + w;
      d = c + w;
      t = d + w;
    }
    for (std::size_t s = 0; s < n_sub; ++s) {
      apply(m.data(), a, phi_rate, psi_rate);
      for (std::size_t k = 0; k < w; ++k) t[k] = m[k] + 0.5 * h * a[k];
      apply(t, b, phi_rate, psi_rate);
      for (std::size_t k = 0; k < w; ++k) t[k] = m[k] + 0.5 * h * b[k];
      apply(t, c, phi_rate, psi_rate);
      for (std::size_t k = 0; k < w; ++k) t[k] = m[k] + h * c[k];
      apply(t, d, phi_rate, psi_rate);
      for (std::size_t k = 0; k < w; ++k) m[k] += h / 6.0 * (a[k] + 2.0 * b[k] + 2.0 * c[k] + d[k]);
    }
  }

  /// Right-hand side dm = A m; A is linear in both forcing rates.
  void apply(const double* m, double* dm, double phi_rate, double psi_rate) const noexcept {
    const double diag = -p_.alpha + p_.beta_s * psi_rate;
    const double lin = p_.alpha * p_.lambda_bar + p_.beta_c * phi_rate;
    const double half_s2 = 0.5 * p_.sigma * p_.sigma;
    dm[0] = -m[1];
    for (std::size_t k = 1; k <= order_; ++k) {
      const auto kd = static_cast<double>(k);
      const double next = k < order_ ? m[k + 1] : m[order_];
      dm[k] = diag * kd * m[k] + (lin * kd + half_s2 * kd * (kd - 1.0)) * m[k - 1] - next;
    }
  }

  /// dl = A^T l.
  void apply_transpose(const double* l, double* dl, double phi_rate, double psi_rate) const noexcept {
    const double diag = -p_.alpha + p_.beta_s * psi_rate;
    const double lin = p_.alpha * p_.lambda_bar + p_.beta_c * phi_rate;
    const double half_s2 = 0.5 * p_.sigma * p_.sigma;
    for (std::size_t j = 0; j <= order_; ++j) {
      const auto jd = static_cast<double>(j);
      double v = diag * jd * l[j];
      if (j < order_) {
        const double kd = jd + 1.0;
        v += (lin * kd + half_s2 * kd * (kd - 1.0)) * l[j + 1];
      } else {
        v -= l[j];
      }
      if (j > 0) v -= l[j - 1];
      dl[j] = v;
    }
  }

  /// l . (dA/dphi_rate) m and l . (dA/dpsi_rate) m.
  double dot_dphi(const double* l, const double* m) const noexcept {
    double s = 0.0;
    for (std::size_t k = 1; k <= order_; ++k) s += l[k] * static_cast<double>(k) * m[k - 1];
    return p_.beta_c * s;
  }
  double dot_dpsi(const double* l, const double* m) const noexcept {
    double s = 0.0;
    for (std::size_t k = 1; k <= order_; ++k) s += l[k] * static_cast<double>(k) * m[k];
    return p_.beta_s * s;
  }

  const TypeParams& params() const noexcept { return p_; }

 private:
  TypeParams p_;
  std::size_t order_;
};

/// Trajectories m_k(t_j) stored row-major by grid index.
struct ExpMoments {
  TimeGrid grid;
  std::size_t order = 0;
  std::vector<double> values;

  double operator()(std::size_t j, std::size_t k) const noexcept { return values[j * (order + 1) + k]; }
  std::span<const double> at(std::size_t j) const noexcept {
    return {values.data() + j * (order + 1), order + 1};
  }
};

inline ExpMoments exp_moments(const TypeParams& params, const ForcedPaths& forcing, std::size_t order) {
  validate_forcing(forcing);
  const ExpMomentIntegrator ode(params, order);
  ExpMoments out{forcing.grid, order, {}};
  const std::size_t w = ode.width();
  out.values.resize(forcing.grid.size() * w);
  auto state = ode.initial_state();
  std::copy(state.begin(), state.end(), out.values.begin());
  const double dt = forcing.grid.dt();
  for (std::size_t j = 0; j < forcing.grid.n_steps; ++j) {
    ode.advance(state, forcing.phi_rate(j), forcing.psi_rate(j), dt);
    std::copy(state.begin(), state.end(), out.values.begin() + static_cast<std::ptrdiff_t>((j + 1) * w));
  }
  return out;
}

/// Survival S(t) = m_0(t), density f(t) = m_1(t), and the defective-measure
/// mass at the point "no default before T", which equals S(T).
struct SurvivalCurve {
  TimeGrid grid;
  std::vector<double> survival;
  std::vector<double> density;

  /// Default probability over the horizon, 1 - S(T).
  double p_horizon() const noexcept { return 1.0 - survival.back(); }
  double atom_mass() const noexcept { return survival.back(); }
  /// Default-time distribution function mu[0, t_k] = 1 - S(t_k).
  double cdf(std::size_t k) const noexcept { return 1.0 - survival[k]; }
};

inline SurvivalCurve survival_curve(const TypeParams& params, const ForcedPaths& forcing, std::size_t order = 12) {
  const auto m = exp_moments(params, forcing, order);
  SurvivalCurve c{forcing.grid, {}, {}};
  c.survival.resize(forcing.grid.size());
  c.density.resize(forcing.grid.size());
  for (std::size_t j = 0; j < forcing.grid.size(); ++j) {
    c.survival[j] = m(j, 0);
    c.density[j] = m(j, 1);
  }
  return c;
}

/// Default probability over [0, T] without forcing.
inline double default_probability(const TypeParams& params, const TimeGrid& grid, std::size_t order = 12) {
  return survival_curve(params, ForcedPaths::zero(grid), order).p_horizon();
}

struct TruncationReport {
  std::size_t order = 0;       // first K with |m_0^K(T) - m_0^{K-1}(T)| < tol
  double last_difference = 0.0;
  bool converged = false;
};

inline TruncationReport find_truncation_order(const TypeParams& params, const ForcedPaths& forcing,
                                              double tol = 1e-8, std::size_t max_order = 40) {
  TruncationReport r;
  double prev = survival_curve(params, forcing, 2).survival.back();
  for (std::size_t k = 3; k <= max_order; ++k) {
    const double cur = survival_curve(params, forcing, k).survival.back();
    r.order = k;
    r.last_difference = std::abs(cur - prev);
    if (r.last_difference < tol) {
      r.converged = true;
      return r;
    }
    prev = cur;
  }
  return r;
}

}  // namespace defclust
