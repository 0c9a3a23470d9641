#pragma once

// JSON run configuration: top-level keys pool, factor, grid, seed.
// Errors carry "file:line: path: message" diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "defclust/errors.hpp"
#include "defclust/model.hpp"

namespace defclust {

struct RunConfig {
  PoolSpec pool;
  std::vector<std::string> group_names;
  FactorSpec factor;
  TimeGrid grid;
  SeedSpec seed;

  /// Fully resolved configuration (defaults filled, rationals evaluated).
  nlohmann::json resolved() const;

  /// Speed-up scale c = N eps^2 of the factor cost; 1 when there is no factor.
  double ldp_c() const {
    if (!factor.active()) return 1.0;
    return static_cast<double>(pool.n_names) * factor.epsilon * factor.epsilon;
  }
};

namespace detail {

// Iterator over the config text that records how far the parser has read.
class TrackingIterator {
 public:
  using iterator_category = std::forward_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  TrackingIterator() = default;
  TrackingIterator(const char* p, const char** mark) : p_(p), mark_(mark) {}

  reference operator*() const { return *p_; }
  TrackingIterator& operator++() {
    ++p_;
    if (mark_ && p_ > *mark_) *mark_ = p_;
    return *this;
  }
  TrackingIterator operator++(int) {
    auto old = *this;
    ++*this;
    return old;
  }
  friend bool operator==(const TrackingIterator& a, const TrackingIterator& b) { return a.p_ == b.p_; }

 private:
  const char* p_ = nullptr;
  const char** mark_ = nullptr;
};

// SAX pass that maps every key path ("pool.groups[1].sigma") to its line.
class LineMapper : public nlohmann::json_sax<nlohmann::json> {
 public:
  LineMapper(const char* begin, const char** mark) : begin_(begin), mark_(mark) {}

  std::map<std::string, std::size_t> lines;
  std::string duplicate;
  std::string error;

  bool null() override { return scalar(); }
  bool boolean(bool) override { return scalar(); }
  bool number_integer(number_integer_t) override { return scalar(); }
  bool number_unsigned(number_unsigned_t) override { return scalar(); }
  bool number_float(number_float_t, const string_t&) override { return scalar(); }
  bool string(string_t&) override { return scalar(); }
  bool binary(binary_t&) override { return scalar(); }

  bool start_object(std::size_t) override { return open(false); }
  bool end_object() override { return close(); }
  bool start_array(std::size_t) override { return open(true); }
  bool end_array() override { return close(); }

  bool key(string_t& k) override {
    auto& f = frames_.back();
    f.key = k;
    const auto path = value_path();
    if (!f.seen.insert(k).second) {
      duplicate = path;
      return false;
    }
    lines.emplace(path, current_line());
    return true;
  }

  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception& e) override {
    error = e.what();
    if (const auto pos = error.find("syntax error"); pos != std::string::npos) error.erase(0, pos);
    return false;
  }

  std::size_t current_line() const {
    const char* end = *mark_ > begin_ ? *mark_ - 1 : begin_;
    return 1 + static_cast<std::size_t>(std::count(begin_, end, '\n'));
  }

 private:
  struct Frame {
    bool array = false;
    std::size_t index = 0;
    std::string key;
    std::string path;
    std::set<std::string> seen;
  };

  std::string value_path() const {
    if (frames_.empty()) return "";
    const auto& f = frames_.back();
    if (f.array) return f.path + "[" + std::to_string(f.index) + "]";
    return f.path.empty() ? f.key : f.path + "." + f.key;
  }

  bool scalar() {
    if (!frames_.empty() && frames_.back().array) lines.emplace(value_path(), current_line());
    advance();
    return true;
  }

  bool open(bool array) {
    const auto path = value_path();
    if (!frames_.empty() && frames_.back().array) lines.emplace(path, current_line());
    frames_.push_back({array, 0, "", path, {}});
    return true;
  }

  bool close() {
    frames_.pop_back();
    advance();
    return true;
  }

  void advance() {
    if (!frames_.empty() && frames_.back().array) ++frames_.back().index;
  }

  const char* begin_;
  const char** mark_;
  std::vector<Frame> frames_;
};

class ConfigReader {
 public:
  ConfigReader(std::string source, std::map<std::string, std::size_t> lines)
      : source_(std::move(source)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    std::string where = source_;
    if (auto line = line_of(path)) where += ":" + std::to_string(line);
    throw ConfigError(where + ": " + (path.empty() ? "" : path + ": ") + message);
  }

  std::size_t line_of(std::string path) const {
    while (!path.empty()) {
      if (auto it = lines_.find(path); it != lines_.end()) return it->second;
      const auto cut = path.find_last_of(".[");
      if (cut == std::string::npos) break;
      path.erase(cut);
    }
    return 0;
  }

  static std::string join(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
  }

  const nlohmann::json& object(const nlohmann::json& j, const std::string& path,
                               std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) fail(path, "expected an object");
    for (const auto& item : j.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; }))
        fail(join(path, item.key()), "unknown key");
    }
    return j;
  }

  const nlohmann::json& require(const nlohmann::json& obj, const std::string& path, const char* key) const {
    if (!obj.contains(key)) fail(join(path, key), "missing required key");
    return obj.at(key);
  }

  double number(const nlohmann::json& obj, const std::string& path, const char* key) const {
    const auto& v = require(obj, path, key);
    if (!v.is_number()) fail(join(path, key), "expected a number");
    return v.get<double>();
  }

  std::uint64_t unsigned_integer(const nlohmann::json& obj, const std::string& path, const char* key) const {
    const auto& v = require(obj, path, key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      fail(join(path, key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  // Accepts a number or a "p/q" string.
  double rational(const nlohmann::json& v, const std::string& path) const {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      const auto slash = s.find('/');
      try {
        std::size_t used = 0;
        if (slash != std::string::npos) {
          const double p = std::stod(s.substr(0, slash), &used);
          if (used != slash) throw std::invalid_argument(s);
          const auto rest = s.substr(slash + 1);
          const double q = std::stod(rest, &used);
          if (used != rest.size() || q == 0.0) throw std::invalid_argument(s);
          return p / q;
        }
      } catch (const std::exception&) {
      }
    }
    fail(path, "expected a number or a \"p/q\" string");
  }

 private:
  std::string source_;
  std::map<std::string, std::size_t> lines_;
};

inline std::string violation_path(const std::string& field) {
  if (field.rfind("factor.", 0) == 0) return field;
  std::string out = "pool." + field;
  if (const auto pos = out.find(".params."); pos != std::string::npos) out.erase(pos, 7);
  return out;
}

}  // namespace detail

/// Parses and validates a configuration; throws ConfigError on any problem.
inline RunConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  using nlohmann::json;
  const char* begin = text.data();
  const char* mark = begin;
  detail::LineMapper mapper(begin, &mark);
  {
    detail::TrackingIterator first(begin, &mark), last(begin + text.size(), nullptr);
    bool ok = false;
    try {
      ok = json::sax_parse(first, last, &mapper);
    } catch (const json::exception& e) {
      throw ConfigError(source + ":" + std::to_string(mapper.current_line()) + ": " + e.what());
    }
    if (!mapper.duplicate.empty())
      throw ConfigError(source + ":" + std::to_string(mapper.current_line()) + ": " + mapper.duplicate +
                        ": duplicate key");
    if (!ok)
      throw ConfigError(source + ":" + std::to_string(mapper.current_line()) + ": " +
                        (mapper.error.empty() ? std::string("syntax error") : mapper.error));
  }
  const json root = json::parse(text);
  const detail::ConfigReader r(source, mapper.lines);
  RunConfig cfg;

  r.object(root, "", {"pool", "factor", "grid", "seed"});

  const auto& pool = r.object(r.require(root, "", "pool"), "pool", {"n_names", "groups"});
  cfg.pool.n_names = static_cast<std::size_t>(r.unsigned_integer(pool, "pool", "n_names"));
  const auto& groups = r.require(pool, "pool", "groups");
  if (!groups.is_array()) r.fail("pool.groups", "expected an array");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const std::string base = "pool.groups[" + std::to_string(i) + "]";
    const auto& g = r.object(groups[i], base,
                             {"name", "weight", "lambda0", "alpha", "lambda_bar", "sigma", "beta_c", "beta_s"});
    PoolGroup pg;
    std::string name = "G" + std::to_string(i + 1);
    if (g.contains("name")) {
      if (!g["name"].is_string()) r.fail(base + ".name", "expected a string");
      name = g["name"].get<std::string>();
    }
    if (g.contains("weight")) pg.weight = r.rational(g["weight"], base + ".weight");
    pg.params.lambda0 = r.number(g, base, "lambda0");
    pg.params.alpha = r.number(g, base, "alpha");
    pg.params.lambda_bar = r.number(g, base, "lambda_bar");
    pg.params.sigma = r.number(g, base, "sigma");
    pg.params.beta_c = r.number(g, base, "beta_c");
    pg.params.beta_s = r.number(g, base, "beta_s");
    cfg.pool.groups.push_back(pg);
    cfg.group_names.push_back(std::move(name));
  }

  if (root.contains("factor")) {
    const auto& f = root["factor"];
    if (!f.is_object()) r.fail("factor", "expected an object");
    const auto& kind = r.require(f, "factor", "kind");
    const std::string k = kind.is_string() ? kind.get<std::string>() : "";
    if (k == "none") {
      r.object(f, "factor", {"kind", "epsilon"});
      if (f.contains("epsilon")) cfg.factor.epsilon = r.number(f, "factor", "epsilon");
    } else if (k == "ou" || k == "cir") {
      r.object(f, "factor", {"kind", "speed", "level", "vol", "x0", "epsilon"});
      cfg.factor.kind = k == "ou" ? FactorKind::ou : FactorKind::cir;
      cfg.factor.speed = r.number(f, "factor", "speed");
      cfg.factor.level = r.number(f, "factor", "level");
      cfg.factor.vol = r.number(f, "factor", "vol");
      cfg.factor.x0 = r.number(f, "factor", "x0");
      const auto& eps = r.require(f, "factor", "epsilon");
      if (eps.is_string() && eps.get<std::string>() == "1/sqrt(N)") {
        if (cfg.pool.n_names == 0) r.fail("pool.n_names", "must be a positive integer");
        cfg.factor.epsilon = epsilon_inverse_sqrt(cfg.pool.n_names);
      } else if (eps.is_number()) {
        cfg.factor.epsilon = eps.get<double>();
      } else {
        r.fail("factor.epsilon", "expected a number or \"1/sqrt(N)\"");
      }
    } else {
      r.fail("factor.kind", "expected one of none, ou, cir");
    }
  }

  const auto& grid = r.object(r.require(root, "", "grid"), "grid", {"horizon", "steps"});
  const double horizon = r.number(grid, "grid", "horizon");
  std::size_t steps = 500;
  if (grid.contains("steps")) steps = static_cast<std::size_t>(r.unsigned_integer(grid, "grid", "steps"));
  if (!(horizon > 0.0) || !std::isfinite(horizon)) r.fail("grid.horizon", "must be positive");
  if (steps == 0) r.fail("grid.steps", "must be positive");
  cfg.grid = TimeGrid(horizon, steps);

  const auto& seed = r.object(r.require(root, "", "seed"), "seed", {"master", "run"});
  cfg.seed.master_seed = r.unsigned_integer(seed, "seed", "master");
  if (seed.contains("run")) {
    const auto run = r.unsigned_integer(seed, "seed", "run");
    if (run > 0xffffffffu) r.fail("seed.run", "must fit in 32 bits");
    cfg.seed.run = static_cast<std::uint32_t>(run);
  }

  auto violations = validate_pool(cfg.pool);
  const auto fv = validate_factor(cfg.factor);
  violations.insert(violations.end(), fv.begin(), fv.end());
  if (!violations.empty()) {
    const auto& v = violations.front();
    r.fail(detail::violation_path(v.field), v.message);
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

inline nlohmann::json RunConfig::resolved() const {
  using nlohmann::json;
  json groups = json::array();
  for (std::size_t i = 0; i < pool.groups.size(); ++i) {
    const auto& g = pool.groups[i];
    groups.push_back({{"name", i < group_names.size() ? group_names[i] : "G" + std::to_string(i + 1)},
                      {"weight", g.weight},
                      {"lambda0", g.params.lambda0},
                      {"alpha", g.params.alpha},
                      {"lambda_bar", g.params.lambda_bar},
                      {"sigma", g.params.sigma},
                      {"beta_c", g.params.beta_c},
                      {"beta_s", g.params.beta_s}});
  }
  json f;
  switch (factor.kind) {
    case FactorKind::none: f = {{"kind", "none"}, {"epsilon", factor.epsilon}}; break;
    case FactorKind::ou:
    case FactorKind::cir:
      f = {{"kind", factor.kind == FactorKind::ou ? "ou" : "cir"},
           {"speed", factor.speed},
           {"level", factor.level},
           {"vol", factor.vol},
           {"x0", factor.x0},
           {"epsilon", factor.epsilon}};
      break;
  }
  return {{"pool", {{"n_names", pool.n_names}, {"groups", groups}}},
          {"factor", f},
          {"grid", {{"horizon", grid.horizon}, {"steps", grid.n_steps}}},
          {"seed", {{"master", seed.master_seed}, {"run", seed.run}}}};
}

}  // namespace defclust
