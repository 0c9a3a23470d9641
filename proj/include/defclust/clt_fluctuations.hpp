#pragma once

// Fluctuation moments xi_k = <l^k, Xi_t> of a homogeneous pool around its
// law-of-large-numbers limit, so that L^N_t ~ L_t - xi_0(t) / sqrt(N).
//
//   dxi_k = [(sigma^2 k (k-1) / 2 + alpha lbar k + bC k u_1) xi_{k-1}
//            - alpha k xi_k - xi_{k+1}
//            + (e bS b0 k + (e bS s0)^2 k (k-1) / 2) xi_k
//            + bC k u_{k-1} xi_1] dt + e bS s0 k xi_k dV + dm_k,
//
// with xi_{K+1} = xi_K and xi(0) = 0. Given the factor, (dm_k) is Gaussian
// with covariance rate
//
//   C_kj = sigma^2 k j u_{k+j-1} + u_{k+j+1} + bC^2 k j u_{k-1} u_{j-1} u_1
//          - bC (k u_{k-1} u_{j+1} + j u_{j-1} u_{k+1}).
//
// The factor-driven diagonal part is integrated exactly, as for the moments
// u_k; the rest takes an Euler step with increments drawn from C after
// projecting it onto the positive semidefinite cone.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "defclust/lln_moments.hpp"
#include "defclust/parallel.hpp"
#include "defclust/rng.hpp"

namespace defclust {

struct FluctuationPath {
  TimeGrid grid;
  std::size_t order = 0;
  std::vector<double> xi;  // [grid index][k]
  std::size_t psd_projections = 0;  // steps where C had a negative eigenvalue

  double operator()(std::size_t j, std::size_t k) const noexcept { return xi[j * (order + 1) + k]; }
  double xi0(std::size_t j) const noexcept { return xi[j * (order + 1)]; }
};

namespace detail {

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 16, 16>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 16, 1>;

inline void martingale_rate(const TypeParams& p, const double* u, std::size_t kf, SmallMatrix& c) {
  const double u1 = u[1];
  const double s2 = p.sigma * p.sigma;
  const double bc = p.beta_c;
  auto um1 = [&](std::size_t k) { return k == 0 ? 0.0 : u[k - 1]; };
  for (std::size_t k = 0; k <= kf; ++k) {
    for (std::size_t j = k; j <= kf; ++j) {
      const auto kd = static_cast<double>(k), jd = static_cast<double>(j);
      double v = u[k + j + 1];
      if (k > 0 && j > 0) v += s2 * kd * jd * u[k + j - 1] + bc * bc * kd * jd * um1(k) * um1(j) * u1;
      v -= bc * (kd * um1(k) * u[j + 1] + jd * um1(j) * u[k + 1]);
      c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = v;
      c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = v;
    }
  }
}

}  // namespace detail

/// Solves the fluctuation system along the factor path and moments of `lln`.
/// Martingale increments are read from the martingale substream of `key`.
inline FluctuationPath solve_fluctuations(const PoolSpec& pool, const FactorSpec& factor, std::size_t order_f,
                                          const MomentTrajectory& lln, StreamKey key) {
  if (!pool.homogeneous()) throw std::invalid_argument("fluctuation limit supports homogeneous pools only");
  if (order_f < 1 || order_f > 7) throw std::invalid_argument("fluctuation order must lie in [1, 7]");
  if (lln.order < 2 * order_f + 1)
    throw std::invalid_argument("moment order must be at least 2 K_f + 1 = " + std::to_string(2 * order_f + 1));
  if (lln.n_types != 1) throw std::invalid_argument("moment trajectory must have a single type");

  const TypeParams& p = pool.groups.front().params;
  const TimeGrid& grid = lln.grid;
  const double dt = grid.dt();
  const double sqdt = std::sqrt(dt);
  const std::size_t w = order_f + 1;
  const auto n = static_cast<Eigen::Index>(w);

  FluctuationPath out;
  out.grid = grid;
  out.order = order_f;
  out.xi.assign(grid.size() * w, 0.0);

  RandomStream rng(key, Substream::martingale);
  std::vector<double> xi(w, 0.0), drift(w), next(w);
  detail::SmallMatrix c(n, n);
  detail::SmallVector z(n);
  Eigen::SelfAdjointEigenSolver<detail::SmallMatrix> eig(n);
  const double b = factor.active() ? factor.epsilon * p.beta_s : 0.0;

  for (std::size_t j = 0; j < grid.n_steps; ++j) {
    const double* u = lln.u.data() + j * (lln.order + 1);
    const double x = lln.x[j];
    const double dx = lln.x[j + 1] - lln.x[j];

    // Euler drift and martingale increment, evaluated at the left end
    const double half_s2 = 0.5 * p.sigma * p.sigma;
    for (std::size_t k = 0; k < w; ++k) {
      const auto kd = static_cast<double>(k);
      const double up = k < order_f ? xi[k + 1] : xi[order_f];
      double d = -p.alpha * kd * xi[k] - up;
      if (k > 0) {
        d += (half_s2 * kd * (kd - 1.0) + p.alpha * p.lambda_bar * kd + p.beta_c * kd * u[1]) * xi[k - 1];
        d += p.beta_c * kd * u[k - 1] * xi[1];
      }
      drift[k] = d;
    }

    detail::martingale_rate(p, u, order_f, c);
    eig.compute(c);
    const auto& vals = eig.eigenvalues();
    if (vals(0) < -1e-10 * std::max(1.0, std::abs(vals(n - 1)))) ++out.psd_projections;
    for (Eigen::Index i = 0; i < n; ++i) z(i) = std::sqrt(std::max(vals(i), 0.0)) * rng.normal() * sqdt;
    const detail::SmallVector dm = eig.eigenvectors() * z;

    for (std::size_t k = 0; k < w; ++k) next[k] = xi[k] + drift[k] * dt + dm(static_cast<Eigen::Index>(k));

    if (b != 0.0) {
      const double s0 = factor.diffusion(x);
      const double g = std::exp(b * dx - 0.5 * b * b * s0 * s0 * dt);
      double mult = 1.0;
      for (std::size_t k = 0; k < w; ++k, mult *= g) next[k] *= mult;
    }
    xi.swap(next);
    for (std::size_t k = 0; k < w; ++k) {
      if (!std::isfinite(xi[k])) throw NumericalError("fluctuation system diverged at step " + std::to_string(j));
      out.xi[(j + 1) * w + k] = xi[k];
    }
  }
  return out;
}

/// Per-path terminal values of the limit loss, the fluctuation xi_0 and the
/// second-order approximation L_T - xi_0(T) / sqrt(N).
struct SecondOrderSamples {
  std::size_t n_names = 0;
  std::vector<double> lln;
  std::vector<double> xi0;
  std::vector<double> second_order;
  std::size_t psd_projections = 0;
  std::size_t projected_paths = 0;  // paths whose moment system needed projection
};

/// Path j uses stream seed.stream(j): the factor realisation is the one an
/// exact simulation of path j would see.
inline SecondOrderSamples second_order_loss_samples(const PoolSpec& pool, const FactorSpec& factor,
                                                    const TimeGrid& grid, std::size_t order_f,
                                                    std::size_t order, std::size_t n_names,
                                                    std::size_t n_paths, const SeedSpec& seed) {
  if (n_paths == 0) throw std::invalid_argument("n_paths must be at least 1");
  if (n_names == 0) throw std::invalid_argument("n_names must be positive");
  SecondOrderSamples out;
  out.n_names = n_names;
  out.lln.resize(n_paths);
  out.xi0.resize(n_paths);
  out.second_order.resize(n_paths);
  std::vector<std::size_t> psd(n_paths, 0), proj(n_paths, 0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_names));
  parallel_for(n_paths, [&](std::size_t j) {
    const auto key = seed.stream(j);
    const auto lln = solve_lln(pool, factor, grid, order, std::nullopt, key);
    const auto fl = solve_fluctuations(pool, factor, order_f, lln, key);
    out.lln[j] = lln.terminal_loss();
    out.xi0[j] = fl.xi0(grid.n_steps);
    out.second_order[j] = out.lln[j] - scale * out.xi0[j];
    psd[j] = fl.psd_projections;
    proj[j] = lln.projected_steps > 0;
  });
  for (std::size_t j = 0; j < n_paths; ++j) {
    out.psd_projections += psd[j];
    out.projected_paths += proj[j];
  }
  return out;
}

}  // namespace defclust
