#pragma once

// Large-deviations rate functions for the terminal loss L^N_T.
//
// Independent homogeneous names: the binomial relative entropy
//   I(l) = l ln(l / p) + (1 - l) ln((1 - l) / (1 - p)),  p = mu_0[0, T],
// attained by phi(t) = l mu_0[0, t] / p.
//
// Heterogeneous pool with contagion and an OU factor: minimize
//   sum_i w_i g_i(phi_i, phibar, psi) + J_X(psi) / c
// over piecewise-linear paths, where
//   g_i = sum_k dphi_ik ln(dphi_ik / q_ik) + (1 - phi_i(T)) ln((1 - phi_i(T)) / S_i(T)),
// q_ik = S_i(t_k) - S_i(t_k+1) comes from the exponential-moment system forced
// by (phibar, psi), and J_X = 1/2 int (psi' + gamma psi)^2 / vol^2. Increments
// are parameterized as dphi = s z^2 with s fixed by phibar(T) = l. Gradients
// come from the discrete adjoint of the RK4 moment solve.

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "defclust/affine_survival.hpp"
#include "defclust/lln_moments.hpp"

namespace defclust {

/// Binomial relative entropy of l against p.
inline double binomial_rate(double p, double ell) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("default probability must lie in (0, 1)");
  if (!(ell > 0.0 && ell < 1.0)) throw std::invalid_argument("loss level must lie in (0, 1)");
  if (ell == p) return 0.0;
  return ell * std::log(ell / p) + (1.0 - ell) * std::log((1.0 - ell) / (1.0 - p));
}

struct IndependentRate {
  double value = 0.0;
  double p = 0.0;
  TimeGrid grid;
  std::vector<double> phi;  // most likely loss path on the grid
};

inline IndependentRate rate_independent(const TypeParams& params, const TimeGrid& grid, double ell,
                                        std::size_t order = 12) {
  const auto curve = survival_curve(params, ForcedPaths::zero(grid), order);
  IndependentRate r;
  r.p = curve.p_horizon();
  r.value = binomial_rate(r.p, ell);
  r.grid = grid;
  r.phi.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) r.phi[k] = ell * curve.cdf(k) / r.p;
  r.phi.back() = ell;
  return r;
}

struct RatePath {
  TimeGrid grid;
  std::vector<double> weights;
  std::vector<std::vector<double>> phi;  // per type, on the grid
  std::vector<double> psi;

  std::vector<double> aggregate() const {
    std::vector<double> a(grid.size(), 0.0);
    for (std::size_t i = 0; i < phi.size(); ++i)
      for (std::size_t k = 0; k < a.size(); ++k) a[k] += weights[i] * phi[i][k];
    return a;
  }
};

struct RateOptions {
  std::size_t order = 12;   // moment truncation of the survival solves
  double c = 1.0;           // lim N eps_N^2
  std::size_t max_iterations = 5000;
  double gradient_tolerance = 1e-11;
  double function_tolerance = 1e-14;
};

struct RateResult {
  double ell = 0.0;
  double value = 0.0;
  double c = 1.0;
  double lln_loss = 0.0;
  bool converged = false;
  std::string status;
  std::size_t iterations = 0;
  RatePath path;
  std::vector<double> entropy;  // g_i per type
  double factor_cost = 0.0;     // J_X(psi) / c
  std::vector<double> start_values;
  bool multiple_minima = false;
};

namespace detail {

inline bool ldp_factor_active(const PoolSpec& pool, const FactorSpec& factor) {
  bool any = false;
  for (const auto& g : pool.groups) any = any || g.params.beta_s != 0.0;
  if (!any || factor.kind == FactorKind::none) return false;
  if (factor.kind != FactorKind::ou) throw std::invalid_argument("rate function supports OU factors only");
  if (!(factor.vol > 0.0)) throw std::invalid_argument("factor.vol must be positive for the rate function");
  return true;
}

}  // namespace detail

/// The discretized objective. Variables are z (type-major, n_types x M)
/// followed, when the factor is active, by psi(t_1..t_M).
class RateObjective {
 public:
  RateObjective(const PoolSpec& pool, const FactorSpec& factor, const TimeGrid& grid, double ell,
                const RateOptions& opts)
      : grid_(grid), ell_(ell), opts_(opts) {
    require_valid(pool);
    if (!(ell > 0.0 && ell < 1.0)) throw std::invalid_argument("loss level must lie in (0, 1)");
    if (!(opts.c > 0.0)) throw std::invalid_argument("c must be positive");
    if (opts.order + 1 > kMaxWidth) throw std::invalid_argument("moment order must be at most 63");
    factor_ = detail::ldp_factor_active(pool, factor);
    gamma_ = factor.speed;
    vol_ = factor.vol;
    for (const auto& g : pool.groups) {
      odes_.emplace_back(g.params, opts.order);
      weights_.push_back(g.weight);
    }
  }

  std::size_t n_types() const noexcept { return odes_.size(); }
  std::size_t steps() const noexcept { return grid_.n_steps; }
  bool factor_active() const noexcept { return factor_; }
  std::size_t size() const noexcept { return (n_types() + (factor_ ? 1 : 0)) * steps(); }
  const std::vector<double>& weights() const noexcept { return weights_; }

  struct Parts {
    std::vector<double> entropy;
    double factor_cost = 0.0;
  };

  RatePath decode(const double* x) const {
    const std::size_t m = steps();
    RatePath p{grid_, weights_, {}, std::vector<double>(grid_.size(), 0.0)};
    const double s = scale(x);
    for (std::size_t i = 0; i < n_types(); ++i) {
      std::vector<double> phi(grid_.size(), 0.0);
      for (std::size_t k = 0; k < m; ++k) phi[k + 1] = phi[k] + s * x[i * m + k] * x[i * m + k];
      p.phi.push_back(std::move(phi));
    }
    if (factor_)
      for (std::size_t k = 0; k < m; ++k) p.psi[k + 1] = x[n_types() * m + k];
    return p;
  }

  /// Variables reproducing the given path (phi increments are used as-is).
  std::vector<double> encode(const RatePath& path) const {
    const std::size_t m = steps();
    std::vector<double> x(size(), 0.0);
    for (std::size_t i = 0; i < n_types(); ++i)
      for (std::size_t k = 0; k < m; ++k)
        x[i * m + k] = std::sqrt(std::max(path.phi[i][k + 1] - path.phi[i][k], 0.0));
    if (factor_)
      for (std::size_t k = 0; k < m; ++k) x[n_types() * m + k] = path.psi[k + 1];
    return x;
  }

  /// Objective and (optionally) gradient; false outside the feasible set.
  bool evaluate(const double* x, double* cost, double* grad, Parts* parts = nullptr) const {
    const std::size_t m = steps(), nt = n_types();
    const double dt = grid_.dt();
    const double s = scale(x);
    if (!(s > 0.0) || !std::isfinite(s)) return false;
    if (grad) std::fill(grad, grad + size(), 0.0);

    std::vector<double> dphi(nt * m), total(nt, 0.0), rate_phi(m, 0.0), rate_psi(m, 0.0);
    for (std::size_t i = 0; i < nt; ++i) {
      for (std::size_t k = 0; k < m; ++k) {
        dphi[i * m + k] = s * x[i * m + k] * x[i * m + k];
        total[i] += dphi[i * m + k];
        rate_phi[k] += weights_[i] * dphi[i * m + k];
      }
      if (!(total[i] < 1.0)) return false;
    }
    for (double& r : rate_phi) r /= dt;
    const double* psi = factor_ ? x + nt * m : nullptr;
    auto psi_at = [&](std::size_t k) { return k == 0 || !psi ? 0.0 : psi[k - 1]; };
    if (factor_)
      for (std::size_t k = 0; k < m; ++k) rate_psi[k] = (psi_at(k + 1) - psi_at(k)) / dt;

    double f = 0.0;
    std::vector<double> g_rate_phi(m, 0.0), g_rate_psi(m, 0.0), g_dphi(nt * m, 0.0);
    if (parts) parts->entropy.assign(nt, 0.0);
    for (std::size_t i = 0; i < nt; ++i) {
      const auto& ode = odes_[i];
      const std::size_t w = ode.width();
      // forward solve, keeping the state at every substep start
      std::vector<double> state = ode.initial_state(), s0(m + 1);
      std::vector<std::vector<double>> starts(m);
      std::vector<std::size_t> nsub(m);
      s0[0] = state[0];
      for (std::size_t k = 0; k < m; ++k) {
        nsub[k] = ode.substeps(rate_phi[k], rate_psi[k], dt);
        const double h = dt / static_cast<double>(nsub[k]);
        starts[k].resize(nsub[k] * w);
        for (std::size_t j = 0; j < nsub[k]; ++j) {
          std::copy(state.begin(), state.end(), starts[k].begin() + static_cast<std::ptrdiff_t>(j * w));
          rk4(ode, state.data(), rate_phi[k], rate_psi[k], h);
        }
        s0[k + 1] = state[0];
      }
      const double surv = s0[m];
      const double rest = 1.0 - total[i];
      if (!(surv > 0.0)) return false;
      double gi = rest * std::log(rest / surv);
      for (std::size_t k = 0; k < m; ++k) {
        const double d = dphi[i * m + k];
        if (d == 0.0) continue;
        const double q = s0[k] - s0[k + 1];
        if (!(q > 0.0)) return false;
        gi += d * std::log(d / q);
      }
      f += weights_[i] * gi;
      if (parts) parts->entropy[i] = gi;
      if (!grad) continue;

      // seeds on S(t_k), then the reverse sweep through the RK4 stages
      const double wi = weights_[i];
      std::vector<double> seed(m + 1, 0.0);
      seed[m] -= wi * rest / surv;
      for (std::size_t k = 0; k < m; ++k) {
        const double d = dphi[i * m + k];
        if (d == 0.0) continue;
        const double q = s0[k] - s0[k + 1];
        seed[k] -= wi * d / q;
        seed[k + 1] += wi * d / q;
        g_dphi[i * m + k] = wi * (std::log(d / q) - std::log(rest / surv));
      }
      std::vector<double> lam(w, 0.0);
      for (std::size_t k = m; k-- > 0;) {
        lam[0] += seed[k + 1];
        const double h = dt / static_cast<double>(nsub[k]);
        for (std::size_t j = nsub[k]; j-- > 0;) {
          const double* start = starts[k].data() + j * w;
          rk4_adjoint(ode, start, lam.data(), rate_phi[k], rate_psi[k], h, g_rate_phi[k], g_rate_psi[k]);
        }
      }
    }

    double jx = 0.0;
    if (factor_) {
      const double v2 = vol_ * vol_;
      for (std::size_t k = 0; k < m; ++k) {
        const double e = rate_psi[k] + gamma_ * 0.5 * (psi_at(k) + psi_at(k + 1));
        jx += 0.5 * dt * e * e / v2;
        if (grad) {
          const double de = dt * e / v2 / opts_.c;
          double* gp = grad + nt * m;
          gp[k] += de * (1.0 / dt + 0.5 * gamma_);
          if (k > 0) gp[k - 1] += de * (-1.0 / dt + 0.5 * gamma_);
        }
      }
    }
    const double fc = jx / opts_.c;
    *cost = f + fc;
    if (parts) parts->factor_cost = fc;
    if (!grad) return true;

    // chain rule: rates -> increments -> z, and psi rates -> psi values
    if (factor_) {
      double* gp = grad + nt * m;
      for (std::size_t k = 0; k < m; ++k) {
        gp[k] += g_rate_psi[k] / dt;
        if (k > 0) gp[k - 1] -= g_rate_psi[k] / dt;
      }
    }
    double mix = 0.0;
    for (std::size_t i = 0; i < nt; ++i)
      for (std::size_t k = 0; k < m; ++k) {
        g_dphi[i * m + k] += weights_[i] * g_rate_phi[k] / dt;
        mix += g_dphi[i * m + k] * dphi[i * m + k];
      }
    for (std::size_t i = 0; i < nt; ++i)
      for (std::size_t k = 0; k < m; ++k)
        grad[i * m + k] = 2.0 * x[i * m + k] * s * (g_dphi[i * m + k] - weights_[i] / ell_ * mix);
    return true;
  }

 private:
  double scale(const double* x) const noexcept {
    const std::size_t m = steps();
    double sum = 0.0;
    for (std::size_t i = 0; i < n_types(); ++i)
      for (std::size_t k = 0; k < m; ++k) sum += weights_[i] * x[i * m + k] * x[i * m + k];
    return ell_ / sum;
  }

  static constexpr std::size_t kMaxWidth = 64;

  static void rk4(const ExpMomentIntegrator& ode, double* m, double rp, double rs, double h) {
    const std::size_t w = ode.width();
    double a[kMaxWidth], b[kMaxWidth], c[kMaxWidth], d[kMaxWidth], t[kMaxWidth];
    ode.apply(m, a, rp, rs);
    for (std::size_t k = 0; k < w; ++k) t[k] = m[k] + 0.5 * h * a[k];
    ode.apply(t, b, rp, rs);
    for (std::size_t k = 0; k < w; ++k) t[k] = m[k] + 0.5 * h * b[k];
    ode.apply(t, c, rp, rs);
    for (std::size_t k = 0; k < w; ++k) t[k] = m[k] + h * c[k];
    ode.apply(t, d, rp, rs);
    for (std::size_t k = 0; k < w; ++k) m[k] += h / 6.0 * (a[k] + 2.0 * b[k] + 2.0 * c[k] + d[k]);
  }

  // Maps the adjoint of the substep's end state (lam) to that of its start,
  // accumulating the derivatives with respect to both forcing rates.
  static void rk4_adjoint(const ExpMomentIntegrator& ode, const double* m, double* lam, double rp, double rs,
                          double h, double& g_rp, double& g_rs) {
    const std::size_t w = ode.width();
    double k1[kMaxWidth], k2[kMaxWidth], k3[kMaxWidth], t1[kMaxWidth], t2[kMaxWidth], t3[kMaxWidth];
    ode.apply(m, k1, rp, rs);
    for (std::size_t k = 0; k < w; ++k) t1[k] = m[k] + 0.5 * h * k1[k];
    ode.apply(t1, k2, rp, rs);
    for (std::size_t k = 0; k < w; ++k) t2[k] = m[k] + 0.5 * h * k2[k];
    ode.apply(t2, k3, rp, rs);
    for (std::size_t k = 0; k < w; ++k) t3[k] = m[k] + h * k3[k];

    double l1[kMaxWidth], l2[kMaxWidth], l3[kMaxWidth], l4[kMaxWidth], lm[kMaxWidth], tmp[kMaxWidth];
    for (std::size_t k = 0; k < w; ++k) {
      lm[k] = lam[k];
      l1[k] = h / 6.0 * lam[k];
      l2[k] = h / 3.0 * lam[k];
      l3[k] = h / 3.0 * lam[k];
      l4[k] = h / 6.0 * lam[k];
    }
    auto stage = [&](const double* lk, const double* at, double* lprev, double coef) {
      g_rp += ode.dot_dphi(lk, at);
      g_rs += ode.dot_dpsi(lk, at);
      ode.apply_transpose(lk, tmp, rp, rs);
      for (std::size_t k = 0; k < w; ++k) {
        lm[k] += tmp[k];
        if (lprev) lprev[k] += coef * tmp[k];
      }
    };
    stage(l4, t3, l3, h);
    stage(l3, t2, l2, 0.5 * h);
    stage(l2, t1, l1, 0.5 * h);
    stage(l1, m, nullptr, 0.0);
    std::copy(lm, lm + w, lam);
  }

  TimeGrid grid_;
  double ell_;
  RateOptions opts_;
  bool factor_ = false;
  double gamma_ = 0.0, vol_ = 1.0;
  std::vector<ExpMomentIntegrator> odes_;
  std::vector<double> weights_;
};

namespace detail {

class CeresRateFunction final : public ceres::FirstOrderFunction {
 public:
  explicit CeresRateFunction(const RateObjective& obj) : obj_(obj) {}
  bool Evaluate(const double* x, double* cost, double* grad) const override {
    return obj_.evaluate(x, cost, grad);
  }
  int NumParameters() const override { return static_cast<int>(obj_.size()); }

 private:
  const RateObjective& obj_;
};

// Rescales per-type loss paths so that the aggregate ends at ell while each
// type's terminal survivor fraction shrinks by the same factor.
inline RatePath fit_start(const std::vector<std::vector<double>>& shape, const std::vector<double>& weights,
                          const TimeGrid& grid, double ell) {
  RatePath p{grid, weights, shape, std::vector<double>(grid.size(), 0.0)};
  double agg = 0.0;
  for (std::size_t i = 0; i < shape.size(); ++i) agg += weights[i] * shape[i].back();
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const double end0 = shape[i].back();
    if (!(end0 > 0.0) || !(agg < 1.0)) {
      for (std::size_t k = 0; k < grid.size(); ++k) p.phi[i][k] = ell * grid.time(k) / grid.horizon;
      continue;
    }
    const double end = 1.0 - (1.0 - end0) * (1.0 - ell) / (1.0 - agg);
    for (auto& v : p.phi[i]) v *= end / end0;
  }
  return p;
}

inline double lln_terminal_loss(const MomentTrajectory& lln, const std::vector<double>& weights) {
  double loss = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) loss += weights[i] - lln(lln.grid.n_steps, i, 0);
  return loss;
}

inline RateResult rate_heterogeneous_impl(const PoolSpec& pool, const FactorSpec& factor, const TimeGrid& grid,
                                          double ell, const RateOptions& opts,
                                          const std::optional<RatePath>& warm) {
  if (!(ell < 1.0)) throw std::invalid_argument("loss level must be below 1");
  const RateObjective obj(pool, factor, grid, ell, opts);
  const std::size_t nt = obj.n_types();
  const auto& weights = obj.weights();

  RateResult out;
  out.ell = ell;
  out.c = opts.c;

  // typical path: the deterministic limit without the factor
  const auto lln = solve_lln(pool, FactorSpec::none(), grid, opts.order);
  std::vector<std::vector<double>> lln_phi(nt, std::vector<double>(grid.size()));
  for (std::size_t i = 0; i < nt; ++i)
    for (std::size_t k = 0; k < grid.size(); ++k) lln_phi[i][k] = 1.0 - lln(k, i, 0) / weights[i];
  out.lln_loss = lln_terminal_loss(lln, weights);
  if (ell <= out.lln_loss) {
    out.value = 0.0;
    out.converged = true;
    out.status = "below typical loss";
    out.path = {grid, weights, lln_phi, std::vector<double>(grid.size(), 0.0)};
    out.entropy.assign(nt, 0.0);
    return out;
  }

  std::vector<RatePath> starts;
  starts.push_back(fit_start(lln_phi, weights, grid, ell));
  std::vector<std::vector<double>> prop(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    const auto curve = survival_curve(pool.groups[i].params, ForcedPaths::zero(grid), opts.order);
    prop[i].resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) prop[i][k] = curve.cdf(k);
  }
  starts.push_back(fit_start(prop, weights, grid, ell));
  std::vector<std::vector<double>> ramp(nt, std::vector<double>(grid.size()));
  for (auto& r : ramp)
    for (std::size_t k = 0; k < grid.size(); ++k) r[k] = ell * grid.time(k) / grid.horizon;
  starts.push_back(fit_start(ramp, weights, grid, ell));
  if (warm) starts.push_back(fit_start(warm->phi, weights, grid, ell));
  if (warm) starts.back().psi = warm->psi;

  ceres::GradientProblemSolver::Options so;
  so.line_search_direction_type = ceres::LBFGS;
  so.max_num_iterations = static_cast<int>(opts.max_iterations);
  so.gradient_tolerance = opts.gradient_tolerance;
  so.function_tolerance = opts.function_tolerance;
  so.parameter_tolerance = 1e-14;
  so.logging_type = ceres::SILENT;
  so.minimizer_progress_to_stdout = false;

  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_x;
  for (const auto& start : starts) {
    std::vector<double> x = obj.encode(start);
    double f0 = 0.0;
    if (!obj.evaluate(x.data(), &f0, nullptr)) {
      out.start_values.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    ceres::GradientProblem problem(new CeresRateFunction(obj));
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(so, problem, x.data(), &summary);
    out.start_values.push_back(summary.final_cost);
    if (summary.final_cost < best) {
      best = summary.final_cost;
      best_x = x;
      out.converged = summary.termination_type == ceres::CONVERGENCE;
      out.status = summary.message;
      out.iterations = summary.iterations.size();
    }
  }
  if (best_x.empty()) throw NumericalError("no feasible starting path for the rate optimization");

  const auto [lo, hi] = std::minmax_element(out.start_values.begin(), out.start_values.end());
  out.multiple_minima = std::isfinite(*hi) && *hi - *lo > 1e-6 * std::max(1.0, std::abs(*lo));

  RateObjective::Parts parts;
  double value = 0.0;
  obj.evaluate(best_x.data(), &value, nullptr, &parts);
  out.entropy = parts.entropy;
  out.factor_cost = parts.factor_cost;
  out.value = out.factor_cost;
  for (std::size_t i = 0; i < nt; ++i) out.value += weights[i] * out.entropy[i];
  out.path = obj.decode(best_x.data());
  return out;
}

}  // namespace detail

/// Rate I'(l) of the pool's terminal loss and its most likely path. Returns 0
/// with the typical path when l does not exceed the deterministic-limit loss.
inline RateResult rate_heterogeneous(const PoolSpec& pool, const FactorSpec& factor, const TimeGrid& grid,
                                     double ell, const RateOptions& opts) {
  return detail::rate_heterogeneous_impl(pool, factor, grid, ell, opts, std::nullopt);
}

/// Rate function over a list of levels; each solve is warm-started from the
/// previous extremal.
inline std::vector<RateResult> rate_curve(const PoolSpec& pool, const FactorSpec& factor, const TimeGrid& grid,
                                          const std::vector<double>& levels, const RateOptions& opts) {
  std::vector<RateResult> out;
  std::optional<RatePath> warm;
  for (double ell : levels) {
    out.push_back(detail::rate_heterogeneous_impl(pool, factor, grid, ell, opts, warm));
    if (out.back().value > 0.0) warm = out.back().path;
  }
  return out;
}

}  // namespace defclust
