#pragma once

#include <cmath>
#include <vector>

#include "defclust/model.hpp"
#include "defclust/rng.hpp"

namespace defclust {

/// One realisation of the systematic factor on a grid: values X(t_k) and the
/// Brownian increments dV_k driving step k -> k+1.
struct FactorPath {
  std::vector<double> x;
  std::vector<double> dv;

  double dx(std::size_t k) const noexcept { return x[k + 1] - x[k]; }
};

/// Euler scheme X_{k+1} = X_k + b0(X_k) dt + sigma0(X_k) dV_k, reading dV from
/// the factor substream of `key`. A factor of kind none stays at x0 and
/// consumes no draws. Every module that needs the factor for a given path
/// regenerates the same realisation from the same key.
inline FactorPath simulate_factor_path(const FactorSpec& factor, const TimeGrid& grid, StreamKey key) {
  FactorPath out;
  out.x.assign(grid.size(), factor.x0);
  out.dv.assign(grid.n_steps, 0.0);
  if (factor.kind == FactorKind::none) return out;

  RandomStream rng(key, Substream::factor);
  const double dt = grid.dt();
  const double sq = std::sqrt(dt);
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    const double dv = sq * rng.normal();
    const double x = out.x[k];
    out.dv[k] = dv;
    out.x[k + 1] = x + factor.drift(x) * dt + factor.diffusion(x) * dv;
  }
  return out;
}

}  // namespace defclust
