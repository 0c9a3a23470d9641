#pragma once

// Named parameter sets used by the reproduction commands and the tests.

#include <cstddef>

#include "defclust/model.hpp"

namespace defclust::scenarios {

/// Three-type test portfolio: types A, B, C with weights 1/6, 1/3, 1/2 and
/// contagion 10, 3, 1 (zero when with_contagion is false).
inline PoolSpec table1_pool(std::size_t n_names, bool with_contagion = true) {
  const double bc[3] = {10.0, 3.0, 1.0};
  const double w[3] = {1.0 / 6.0, 1.0 / 3.0, 0.5};
  PoolSpec pool;
  pool.n_names = n_names;
  for (int i = 0; i < 3; ++i) {
    TypeParams p{0.2, 0.5, 2.0, 0.5, with_contagion ? bc[i] : 0.0, 1.0};
    pool.groups.push_back({p, w[i]});
  }
  return pool;
}

/// OU factor with unit speed and volatility started at 0, epsilon = 1/sqrt(N).
inline FactorSpec table1_factor(std::size_t n_names) {
  return FactorSpec::ou(1.0, 1.0, 0.0, 0.0, epsilon_inverse_sqrt(n_names));
}

/// (sigma, alpha, lbar, l0, beta_c, beta_s) = (.9, 4, .2, .2, beta_c, beta_s)
inline TypeParams betacone_type(double beta_c = 4.0, double beta_s = 8.0) {
  return {0.2, 4.0, 0.2, 0.9, beta_c, beta_s};
}

inline PoolSpec homogeneous_pool(const TypeParams& p, std::size_t n_names) {
  return {{{p, 1.0}}, n_names};
}

/// OU factor with reversion speed 2, volatility 1, initial value 1, mean 1.
inline FactorSpec clt_factor(double epsilon = 1.0) { return FactorSpec::ou(2.0, 1.0, 1.0, 1.0, epsilon); }

inline TypeParams clt_type() { return {0.2, 4.0, 0.2, 0.9, 1.0, 1.0}; }

}  // namespace defclust::scenarios
