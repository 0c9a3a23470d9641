#pragma once

// Command-line front end: `risk <subcommand> --config FILE --out DIR ...`.
// Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure,
// 1 anything else.

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "defclust/affine_survival.hpp"
#include "defclust/clt_fluctuations.hpp"
#include "defclust/config.hpp"
#include "defclust/csv.hpp"
#include "defclust/errors.hpp"
#include "defclust/exact_sim.hpp"
#include "defclust/importance_sampling.hpp"
#include "defclust/ldp.hpp"
#include "defclust/lln_moments.hpp"
#include "defclust/manifest.hpp"
#include "defclust/scenarios.hpp"
#include "defclust/stats.hpp"

namespace defclust::cli {

using nlohmann::json;
using namespace defclust::stats;
namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

inline const std::vector<double> kSummaryQuantiles = {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99};

struct CommonOptions {
  std::string config;
  std::string out = "out";
  bool gnuplot = false;
};

/// Collects the outputs of one run and writes them with a shared manifest sidecar.
class OutputSet {
 public:
  OutputSet(fs::path dir, Manifest manifest, bool gnuplot)
      : dir_(std::move(dir)), manifest_(std::move(manifest)), gnuplot_(gnuplot) {
    fs::create_directories(dir_);
  }

  void csv(const std::string& name, const csv::Writer& w) { write(name + ".csv", w.str()); }

  void report(const std::string& name, json j) {
    j["config_hash"] = manifest_.config_hash;
    write(name + ".json", j.dump(2) + "\n");
  }

  /// Line plot of columns `ys` against column `x` (1-based gnuplot columns).
  void plot_lines(const std::string& name, const std::string& title, int x, const std::vector<int>& ys) {
    if (!gnuplot_) return;
    std::string s = header(name, title);
    s += "plot ";
    for (std::size_t i = 0; i < ys.size(); ++i) {
      if (i) s += ", \\\n     ";
      s += "'" + name + ".csv' using " + std::to_string(x) + ":" + std::to_string(ys[i]) + " with lines";
    }
    write(name + ".gp", s + "\n");
  }

  /// Histogram of one column with the given number of bins on [0, 1].
  void plot_histogram(const std::string& name, const std::string& title, int column, int bins) {
    if (!gnuplot_) return;
    std::string s = header(name, title);
    s += "width = 1.0 / " + std::to_string(bins) + "\n";
    s += "bin(v) = width * (floor(v / width) + 0.5)\n";
    s += "set style fill solid 0.5\n";
    s += "plot '" + name + ".csv' using (bin($" + std::to_string(column) +
         ")):(1.0) smooth frequency with boxes notitle\n";
    write(name + ".gp", s);
  }

  void finish(double wall_time) {
    manifest_.wall_time_seconds = wall_time;
    json j = manifest_.to_json();
    j["outputs"] = files_;
    write_file_atomic(dir_ / (manifest_.subcommand + ".manifest.json"), j.dump(2) + "\n");
  }

  const std::vector<std::string>& files() const noexcept { return files_; }

 private:
  static std::string header(const std::string& name, const std::string& title) {
    return "# gnuplot script for " + name + ".csv\nset datafile separator ','\nset key autotitle columnhead\n"
           "set title '" + title + "'\n";
  }

  void write(const std::string& file, const std::string& content) {
    write_file_atomic(dir_ / file, content);
    files_.push_back(file);
  }

  fs::path dir_;
  Manifest manifest_;
  bool gnuplot_;
  std::vector<std::string> files_;
};

inline json quantile_summary(const std::vector<double>& v) {
  json q = json::object();
  for (double level : kSummaryQuantiles) q[csv::format_number(level)] = quantile(v, level);
  return {{"mean", mean(v)}, {"std", std::sqrt(variance(v))}, {"quantiles", q}, {"n", v.size()}};
}

inline void warn(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}


// ---------------------------------------------------------------------------

struct SimulateOptions {
  std::size_t paths = 1000;
  std::string emit = "terminal";
};

inline void run_simulate(const RunConfig& cfg, const SimulateOptions& o, OutputSet& out, std::ostream& err) {
  warn(err, pool_warnings(cfg.pool));
  warn(err, grid_warnings(cfg.pool, cfg.grid));
  std::vector<std::size_t> steps;
  if (o.emit == "full")
    for (std::size_t k = 0; k <= cfg.grid.n_steps; ++k) steps.push_back(k);
  const auto e = simulate_ensemble(cfg.pool, cfg.factor, cfg.grid, o.paths, cfg.seed, steps);
  const auto n = static_cast<double>(cfg.pool.n_names);
  if (o.emit == "full") {
    csv::Writer w({"path", "t", "loss"});
    for (std::size_t j = 0; j < o.paths; ++j)
      for (std::size_t r = 0; r < steps.size(); ++r) w.row({j, cfg.grid.time(steps[r]), e.samples[r][j]});
    out.csv("simulate", w);
    out.plot_lines("simulate", "loss paths", 2, {3});
  } else {
    csv::Writer w({"path", "defaults", "loss"});
    for (std::size_t j = 0; j < o.paths; ++j)
      w.row({j, static_cast<std::uint64_t>(std::llround(e.terminal[j] * n)), e.terminal[j]});
    out.csv("simulate", w);
    out.plot_histogram("simulate", "terminal loss", 3, 50);
  }
  out.report("simulate_summary", {{"terminal_loss", quantile_summary(e.terminal)}});
}

// ---------------------------------------------------------------------------

inline void run_survival(const RunConfig& cfg, std::size_t order, OutputSet& out) {
  csv::Writer w({"group", "t", "S", "f"});
  json groups = json::array();
  for (std::size_t i = 0; i < cfg.pool.groups.size(); ++i) {
    const auto c = survival_curve(cfg.pool.groups[i].params, ForcedPaths::zero(cfg.grid), order);
    for (std::size_t k = 0; k < cfg.grid.size(); ++k)
      w.row({cfg.group_names[i], cfg.grid.time(k), c.survival[k], c.density[k]});
    groups.push_back({{"group", cfg.group_names[i]}, {"default_probability", c.p_horizon()}});
  }
  out.csv("survival", w);
  out.plot_lines("survival", "survival function", 2, {3});
  out.report("survival_summary", {{"order", order}, {"groups", groups}});
}

// ---------------------------------------------------------------------------

struct LlnOptions {
  std::size_t paths = 1000;
  std::size_t order = 12;
  std::string emit = "terminal";
};

inline void run_lln(const RunConfig& cfg, const LlnOptions& o, OutputSet& out) {
  if (!cfg.factor.active()) {
    const auto traj = solve_lln(cfg.pool, cfg.factor, cfg.grid, o.order);
    csv::Writer w({"t", "loss"});
    for (std::size_t k = 0; k < cfg.grid.size(); ++k) w.row({cfg.grid.time(k), traj.losses[k]});
    out.csv("lln", w);
    out.plot_lines("lln", "limit loss", 1, {2});
    out.report("lln_summary", {{"terminal_loss", traj.terminal_loss()},
                               {"deterministic", true},
                               {"projected_steps", traj.projected_steps}});
    return;
  }
  if (o.emit == "full") {
    std::vector<MomentTrajectory> trajs(o.paths);
    parallel_for(o.paths, [&](std::size_t j) {
      trajs[j] = solve_lln(cfg.pool, cfg.factor, cfg.grid, o.order, std::nullopt, cfg.seed.stream(j));
    });
    csv::Writer w({"path", "t", "loss"});
    std::vector<double> terminal;
    std::size_t projected = 0;
    for (std::size_t j = 0; j < o.paths; ++j) {
      for (std::size_t k = 0; k < cfg.grid.size(); ++k) w.row({j, cfg.grid.time(k), trajs[j].losses[k]});
      terminal.push_back(trajs[j].terminal_loss());
      if (trajs[j].projected_steps) ++projected;
    }
    out.csv("lln", w);
    out.plot_lines("lln", "limit loss paths", 2, {3});
    out.report("lln_summary", {{"terminal_loss", quantile_summary(terminal)},
                               {"deterministic", false},
                               {"projected_paths", projected}});
    return;
  }
  const auto s = lln_loss_distribution(cfg.pool, cfg.factor, cfg.grid, o.order, o.paths, cfg.seed);
  csv::Writer w({"path", "loss"});
  for (std::size_t j = 0; j < o.paths; ++j) w.row({j, s.terminal[j]});
  out.csv("lln", w);
  out.plot_histogram("lln", "limit terminal loss", 2, 50);
  out.report("lln_summary", {{"terminal_loss", quantile_summary(s.terminal)},
                             {"deterministic", false},
                             {"projected_paths", s.projected_paths}});
}

// ---------------------------------------------------------------------------

struct CltOptions {
  std::size_t paths = 1000;
  std::size_t order = 11;
  std::size_t order_f = 5;
  std::vector<double> levels = {0.95, 0.99};
};

inline json risk_json(const std::vector<RiskRow>& rows) {
  json a = json::array();
  for (const auto& r : rows) a.push_back({{"level", r.level}, {"var", r.var}, {"es", r.es}});
  return a;
}

inline void run_clt(const RunConfig& cfg, const CltOptions& o, OutputSet& out) {
  const auto s = second_order_loss_samples(cfg.pool, cfg.factor, cfg.grid, o.order_f, o.order, cfg.pool.n_names,
                                           o.paths, cfg.seed);
  csv::Writer w({"path", "lln", "xi0", "second_order"});
  for (std::size_t j = 0; j < o.paths; ++j) w.row({j, s.lln[j], s.xi0[j], s.second_order[j]});
  out.csv("clt", w);
  out.plot_histogram("clt", "second-order terminal loss", 4, 50);
  out.report("clt", {{"n_names", s.n_names},
                     {"xi0_variance", variance(s.xi0)},
                     {"second_order", risk_json(var_es(s.second_order, o.levels))},
                     {"lln", risk_json(var_es(s.lln, o.levels))},
                     {"psd_projections", s.psd_projections},
                     {"projected_paths", s.projected_paths}});
}

// ---------------------------------------------------------------------------

struct VarOptions {
  std::size_t paths = 2000;
  std::size_t order = 11;
  std::size_t order_f = 5;
  std::vector<double> levels = {0.95, 0.99};
};

inline void run_var(const RunConfig& cfg, const VarOptions& o, OutputSet& out, std::ostream& err) {
  warn(err, grid_warnings(cfg.pool, cfg.grid));
  const auto approx = second_order_loss_samples(cfg.pool, cfg.factor, cfg.grid, o.order_f, o.order,
                                                cfg.pool.n_names, o.paths, cfg.seed);
  const auto exact = simulate_ensemble(cfg.pool, cfg.factor, cfg.grid, o.paths, cfg.seed);
  const std::pair<const char*, const std::vector<double>*> methods[] = {
      {"lln", &approx.lln}, {"clt", &approx.second_order}, {"exact", &exact.terminal}};
  csv::Writer w({"level", "var_lln", "es_lln", "var_clt", "es_clt", "var_exact", "es_exact"});
  json rep = json::object();
  std::vector<std::vector<RiskRow>> rows;
  for (const auto& [name, samples] : methods) {
    rows.push_back(var_es(*samples, o.levels));
    rep[name] = risk_json(rows.back());
  }
  for (std::size_t l = 0; l < o.levels.size(); ++l) {
    std::vector<csv::Cell> row = {o.levels[l]};
    for (const auto& r : rows) {
      row.emplace_back(r[l].var);
      row.emplace_back(r[l].es);
    }
    w.row(row);
  }
  out.csv("var", w);
  out.plot_lines("var", "value at risk", 1, {2, 4, 6});
  rep["n_paths"] = o.paths;
  rep["quantile_convention"] = "type 7 (linear interpolation between order statistics)";
  out.report("var", rep);
}

// ---------------------------------------------------------------------------

struct LdpOptions {
  std::vector<double> levels;
  std::optional<double> extremal;
  std::size_t steps = 100;
  std::size_t order = 12;
  std::optional<double> c;
};

inline json rate_json(const RateResult& r) {
  return {{"ell", r.ell},
          {"value", r.value},
          {"converged", r.converged},
          {"status", r.status},
          {"iterations", r.iterations},
          {"lln_loss", r.lln_loss},
          {"entropy", r.entropy},
          {"factor_cost", r.factor_cost},
          {"start_values", r.start_values},
          {"multiple_minima", r.multiple_minima}};
}

inline csv::Writer extremal_csv(const RateResult& r, const std::vector<std::string>& names) {
  std::vector<std::string> header = {"t"};
  for (const auto& n : names) header.push_back("phi_" + n);
  header.push_back("phi");
  header.push_back("psi");
  csv::Writer w(header);
  const auto& p = r.path;
  const auto agg = p.aggregate();
  for (std::size_t k = 0; k < p.grid.size(); ++k) {
    std::vector<csv::Cell> row = {p.grid.time(k)};
    for (const auto& phi : p.phi) row.emplace_back(phi[k]);
    row.emplace_back(agg[k]);
    row.emplace_back(p.psi.empty() ? 0.0 : p.psi[k]);
    w.row(row);
  }
  return w;
}

inline void run_ldp(const RunConfig& cfg, const LdpOptions& o, OutputSet& out) {
  if (o.levels.empty() && !o.extremal) throw std::invalid_argument("ldp needs --level or --extremal");
  const TimeGrid grid(cfg.grid.horizon, o.steps);
  RateOptions ro;
  ro.order = o.order;
  ro.c = o.c ? *o.c : cfg.ldp_c();
  json rep = {{"c", ro.c}, {"steps", o.steps}};
  if (!o.levels.empty()) {
    const auto curve = rate_curve(cfg.pool, cfg.factor, grid, o.levels, ro);
    csv::Writer w({"ell", "I", "converged", "multiple_minima"});
    json rows = json::array();
    for (const auto& r : curve) {
      w.row({r.ell, r.value, r.converged ? 1 : 0, r.multiple_minima ? 1 : 0});
      rows.push_back(rate_json(r));
    }
    out.csv("ldp_rate", w);
    out.plot_lines("ldp_rate", "rate function", 1, {2});
    rep["rate_curve"] = rows;
  }
  if (o.extremal) {
    const auto r = rate_heterogeneous(cfg.pool, cfg.factor, grid, *o.extremal, ro);
    out.csv("ldp_extremal", extremal_csv(r, cfg.group_names));
    std::vector<int> cols;
    for (int i = 0; i < static_cast<int>(cfg.group_names.size()) + 2; ++i) cols.push_back(i + 2);
    out.plot_lines("ldp_extremal", "extremal paths", 1, cols);
    rep["extremal"] = rate_json(r);
  }
  out.report("ldp", rep);
}

// ---------------------------------------------------------------------------

struct IsOptions {
  double level = 0.0;
  std::size_t samples = 10000;
  std::string method = "auto";
  std::vector<double> betas = {0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
  std::size_t pilot = 1000;
  std::size_t order = 12;
};

inline bool independent_pool(const RunConfig& cfg) {
  for (const auto& g : cfg.pool.groups) {
    if (g.params.beta_c != 0.0) return false;
    if (cfg.factor.active() && g.params.beta_s != 0.0) return false;
  }
  return true;
}

inline json estimate_json(const ISEstimate& e) {
  return {{"estimate", e.estimate},
          {"stderr", e.std_error},
          {"relative_error", e.relative_error},
          {"Q_hat", e.second_moment},
          {"Q_hat_stderr", e.second_moment_std_error},
          {"decay", e.decay},
          {"n_samples", e.n_samples},
          {"hits", e.hits},
          {"n_names", e.n_names},
          {"degenerate_paths", e.degenerate_paths}};
}

inline void run_is(const RunConfig& cfg, const IsOptions& o, OutputSet& out) {
  std::string method = o.method;
  if (method == "auto") method = independent_pool(cfg) ? "independent" : "dependent";
  json rep;
  if (method == "independent") {
    if (!independent_pool(cfg)) throw std::invalid_argument("the independent estimator needs beta_c = 0 and no factor");
    auto pool = cfg.pool;
    for (auto& g : pool.groups) g.params.beta_s = 0.0;
    const auto e = estimate_heterogeneous_independent(pool, cfg.grid, o.level, o.samples, cfg.seed, o.order);
    rep = estimate_json(e);
    rep["theta"] = e.parameter;
  } else {
    double beta = o.betas.front();
    if (o.betas.size() > 1) {
      const auto pilot_seed = cfg.seed.with_run(cfg.seed.run + 1);
      const auto sel = select_beta(cfg.pool, cfg.factor, cfg.grid, o.level, o.betas, o.pilot, pilot_seed);
      beta = sel.beta;
      csv::Writer w({"beta", "estimate", "stderr", "Q_hat", "Q_hat_stderr", "hits"});
      for (const auto& r : sel.table)
        w.row({r.beta, r.estimate, r.std_error, r.second_moment, r.second_moment_std_error, r.hits});
      out.csv("is_beta", w);
      out.plot_lines("is_beta", "pilot second moment", 1, {4});
    }
    const auto e = estimate_dependent(cfg.pool, cfg.factor, cfg.grid, o.level, beta, o.samples, cfg.seed);
    rep = estimate_json(e);
    rep["beta"] = beta;
  }
  rep["method"] = method;
  rep["ell"] = o.level;
  out.report("is", rep);
}

// ---------------------------------------------------------------------------

struct Table1Options {
  std::size_t names = 200;
  std::size_t exact_names = 2000;
  std::size_t paths = 2000;
  std::size_t steps = 100;
  double extremal = 0.81;
  std::vector<double> levels = {0.5, 0.6, 0.7, 0.75, 0.8, 0.81, 0.85, 0.9, 0.95};
  std::uint64_t seed = 1;
};

inline RunConfig table1_config(const Table1Options& o) {
  RunConfig cfg;
  cfg.pool = scenarios::table1_pool(o.names);
  cfg.group_names = {"A", "B", "C"};
  cfg.factor = scenarios::table1_factor(o.names);
  cfg.grid = TimeGrid(1.0, 500);
  cfg.seed = {o.seed, 0};
  return cfg;
}

inline void run_table1(const Table1Options& o, OutputSet& out) {
  const auto cfg = table1_config(o);
  const TimeGrid ldp_grid(cfg.grid.horizon, o.steps);
  json typical = json::object();
  csv::Writer lw({"t", "L_no_contagion", "L_contagion"});
  std::vector<MomentTrajectory> trajs;
  for (bool contagion : {false, true}) {
    const auto pool = scenarios::table1_pool(o.exact_names, contagion);
    trajs.push_back(solve_lln(pool, FactorSpec::none(), cfg.grid, 12));
    const auto e = simulate_ensemble(pool, FactorSpec::none(), cfg.grid, o.paths, cfg.seed.with_run(contagion));
    const double sd = std::sqrt(variance(e.terminal) / static_cast<double>(o.paths));
    typical[contagion ? "contagion" : "no_contagion"] = {
        {"lln", trajs.back().terminal_loss()},
        {"exact_sim_mean", e.mean_terminal()},
        {"exact_sim_stderr", sd},
        {"reference", contagion ? 0.721 : 0.425}};
  }
  for (std::size_t k = 0; k < cfg.grid.size(); ++k)
    lw.row({cfg.grid.time(k), trajs[0].losses[k], trajs[1].losses[k]});
  out.csv("table1_typical", lw);
  out.plot_lines("table1_typical", "typical loss", 1, {2, 3});

  RateOptions ro;
  ro.c = cfg.ldp_c();
  const auto extremal = rate_heterogeneous(cfg.pool, cfg.factor, ldp_grid, o.extremal, ro);
  out.csv("table1_extremal", extremal_csv(extremal, cfg.group_names));
  out.plot_lines("table1_extremal", "extremal paths", 1, {2, 3, 4, 5, 6});

  const auto with = rate_curve(cfg.pool, cfg.factor, ldp_grid, o.levels, ro);
  const auto without = rate_curve(scenarios::table1_pool(o.names, false), cfg.factor, ldp_grid, o.levels, ro);
  csv::Writer rw({"ell", "I_contagion", "I_no_contagion"});
  for (std::size_t i = 0; i < o.levels.size(); ++i) rw.row({o.levels[i], with[i].value, without[i].value});
  out.csv("table1_rate_curve", rw);
  out.plot_lines("table1_rate_curve", "rate functions", 1, {2, 3});

  const auto& psi = extremal.path.psi;
  const std::size_t half = ldp_grid.n_steps / 2;
  json ext = rate_json(extremal);
  ext["phi_T"] = json::object();
  for (std::size_t i = 0; i < 3; ++i) ext["phi_T"][cfg.group_names[i]] = extremal.path.phi[i].back();
  if (!psi.empty()) {
    ext["psi_increment_first_half"] = psi[half] - psi.front();
    ext["psi_increment_second_half"] = psi.back() - psi[half];
  }
  json curves = json::array();
  for (std::size_t i = 0; i < o.levels.size(); ++i)
    curves.push_back({{"ell", o.levels[i]}, {"contagion", rate_json(with[i])}, {"no_contagion", rate_json(without[i])}});
  out.report("table1_report", {{"typical_loss", typical},
                               {"typical_loss_names", o.exact_names},
                               {"typical_loss_paths", o.paths},
                               {"extremal", ext},
                               {"rate_curves", curves}});
}

// ---------------------------------------------------------------------------

/// Runs one command line (without the program name) and returns the exit code.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Default clustering in large portfolios: simulation, limits, large deviations and importance sampling",
               "risk"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  CommonOptions common;
  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    auto* c = sub->add_option("-c,--config", common.config, "JSON configuration file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", common.out, "Output directory")->capture_default_str();
    sub->add_flag("--gnuplot", common.gnuplot, "Also write a gnuplot script per CSV file");
  };

  SimulateOptions sim_o;
  auto* sim = app.add_subcommand("simulate", "Exact simulation of the finite pool");
  add_common(sim);
  sim->add_option("--paths", sim_o.paths, "Number of paths")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--emit", sim_o.emit, "terminal: one row per path; full: one row per (path, grid time)")
      ->capture_default_str()
      ->check(CLI::IsMember({"terminal", "full"}));

  std::size_t surv_order = 12;
  auto* surv = app.add_subcommand("survival", "Survival function and density per group, without forcing");
  add_common(surv);
  surv->add_option("--order", surv_order, "Moment truncation order K")->capture_default_str();

  LlnOptions lln_o;
  auto* lln = app.add_subcommand("lln", "Law of large numbers limit of the loss");
  add_common(lln);
  lln->add_option("--paths", lln_o.paths, "Factor paths (ignored without a factor)")->capture_default_str();
  lln->add_option("--order", lln_o.order, "Moment truncation order K")->capture_default_str();
  lln->add_option("--emit", lln_o.emit, "terminal or full")
      ->capture_default_str()
      ->check(CLI::IsMember({"terminal", "full"}));

  CltOptions clt_o;
  auto* clt = app.add_subcommand("clt", "Second-order (fluctuation) approximation of the loss");
  add_common(clt);
  clt->add_option("--paths", clt_o.paths, "Factor paths")->capture_default_str();
  clt->add_option("--order", clt_o.order, "Moment truncation order of the limit system")->capture_default_str();
  clt->add_option("--order-f", clt_o.order_f, "Truncation order of the fluctuation system")->capture_default_str();
  clt->add_option("--level", clt_o.levels, "VaR/ES level, repeatable")->capture_default_str();

  VarOptions var_o;
  auto* var = app.add_subcommand(
      "var", "VaR and ES from the limit, second-order and exact laws. VaR is the type 7 quantile "
             "(linear interpolation between order statistics); ES averages the samples at or above VaR");
  add_common(var);
  var->add_option("--paths", var_o.paths, "Paths per method")->capture_default_str();
  var->add_option("--order", var_o.order, "Moment truncation order")->capture_default_str();
  var->add_option("--order-f", var_o.order_f, "Fluctuation truncation order")->capture_default_str();
  var->add_option("--level", var_o.levels, "Level, repeatable")->capture_default_str();

  LdpOptions ldp_o;
  double ldp_extremal = 0.0, ldp_c = 0.0;
  auto* ldp = app.add_subcommand("ldp", "Large-deviation rate function and extremal paths");
  add_common(ldp);
  ldp->add_option("--level", ldp_o.levels, "Loss level for the rate curve, repeatable");
  auto* ext_opt = ldp->add_option("--extremal", ldp_extremal, "Loss level whose extremal paths are written");
  ldp->add_option("--steps", ldp_o.steps, "Grid steps of the path optimization")->capture_default_str();
  ldp->add_option("--order", ldp_o.order, "Moment truncation order")->capture_default_str();
  auto* c_opt = ldp->add_option("--cost-scale", ldp_c, "Factor cost scale c (default N epsilon^2)");

  IsOptions is_o;
  auto* is = app.add_subcommand("is", "Importance-sampling estimate of P(L_T >= level)");
  add_common(is);
  is->add_option("--level", is_o.level, "Loss level")->required();
  is->add_option("--samples", is_o.samples, "Samples")->capture_default_str()->check(CLI::PositiveNumber);
  is->add_option("--method", is_o.method, "auto, independent or dependent")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "independent", "dependent"}));
  is->add_option("--beta", is_o.betas, "Twist strength; several values select by pilot runs")
      ->capture_default_str();
  is->add_option("--pilot", is_o.pilot, "Samples per pilot run")->capture_default_str();
  is->add_option("--order", is_o.order, "Moment truncation order")->capture_default_str();

  Table1Options t1_o;
  auto* t1 = app.add_subcommand("reproduce-table1", "Three-type test portfolio: typical losses, extremals, rate curves");
  add_common(t1, false);
  t1->add_option("--names", t1_o.names, "Pool size for the large-deviation analysis")->capture_default_str();
  t1->add_option("--exact-names", t1_o.exact_names, "Pool size for exact simulation")->capture_default_str();
  t1->add_option("--paths", t1_o.paths, "Exact-simulation paths")->capture_default_str();
  t1->add_option("--steps", t1_o.steps, "Grid steps of the path optimization")->capture_default_str();
  t1->add_option("--extremal", t1_o.extremal, "Loss level of the extremal paths")->capture_default_str();
  t1->add_option("--level", t1_o.levels, "Rate-curve levels")->capture_default_str();
  t1->add_option("--seed", t1_o.seed, "Master seed")->capture_default_str();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    const Stopwatch clock;
    if (t1->parsed()) {
      const auto cfg = table1_config(t1_o);
      json opts = {{"names", t1_o.names}, {"exact_names", t1_o.exact_names}, {"paths", t1_o.paths},
                   {"steps", t1_o.steps}, {"extremal", t1_o.extremal},  {"levels", t1_o.levels}};
      OutputSet outputs(common.out, make_manifest("reproduce-table1", cfg, opts), common.gnuplot);
      run_table1(t1_o, outputs);
      outputs.finish(clock.seconds());
      return kExitOk;
    }

    const auto cfg = load_config(common.config);
    if (sim->parsed()) {
      OutputSet o(common.out, make_manifest("simulate", cfg, {{"paths", sim_o.paths}, {"emit", sim_o.emit}}),
                  common.gnuplot);
      run_simulate(cfg, sim_o, o, err);
      o.finish(clock.seconds());
    } else if (surv->parsed()) {
      OutputSet o(common.out, make_manifest("survival", cfg, {{"order", surv_order}}), common.gnuplot);
      run_survival(cfg, surv_order, o);
      o.finish(clock.seconds());
    } else if (lln->parsed()) {
      OutputSet o(common.out,
                  make_manifest("lln", cfg, {{"paths", lln_o.paths}, {"order", lln_o.order}, {"emit", lln_o.emit}}),
                  common.gnuplot);
      run_lln(cfg, lln_o, o);
      o.finish(clock.seconds());
    } else if (clt->parsed()) {
      OutputSet o(common.out,
                  make_manifest("clt", cfg, {{"paths", clt_o.paths}, {"order", clt_o.order},
                                             {"order_f", clt_o.order_f}, {"levels", clt_o.levels}}),
                  common.gnuplot);
      run_clt(cfg, clt_o, o);
      o.finish(clock.seconds());
    } else if (var->parsed()) {
      OutputSet o(common.out,
                  make_manifest("var", cfg, {{"paths", var_o.paths}, {"order", var_o.order},
                                             {"order_f", var_o.order_f}, {"levels", var_o.levels}}),
                  common.gnuplot);
      run_var(cfg, var_o, o, err);
      o.finish(clock.seconds());
    } else if (ldp->parsed()) {
      if (ext_opt->count()) ldp_o.extremal = ldp_extremal;
      if (c_opt->count()) ldp_o.c = ldp_c;
      json opts = {{"levels", ldp_o.levels}, {"steps", ldp_o.steps}, {"order", ldp_o.order}};
      if (ldp_o.extremal) opts["extremal"] = *ldp_o.extremal;
      opts["c"] = ldp_o.c ? *ldp_o.c : cfg.ldp_c();
      OutputSet o(common.out, make_manifest("ldp", cfg, opts), common.gnuplot);
      run_ldp(cfg, ldp_o, o);
      o.finish(clock.seconds());
    } else if (is->parsed()) {
      OutputSet o(common.out,
                  make_manifest("is", cfg, {{"level", is_o.level}, {"samples", is_o.samples},
                                            {"method", is_o.method}, {"betas", is_o.betas},
                                            {"pilot", is_o.pilot}, {"order", is_o.order}}),
                  common.gnuplot);
      run_is(cfg, is_o, o);
      o.finish(clock.seconds());
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace defclust::cli
