#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "defclust/config.hpp"
#include "defclust/csv.hpp"
#include "defclust/manifest.hpp"

using namespace defclust;

namespace {

const char* kTable1 = R"cfg({
  "pool": {
    "n_names": 200,
    "groups": [
      {"name": "A", "weight": "1/6", "lambda0": 0.2, "alpha": 0.5, "lambda_bar": 2.0, "sigma": 0.5, "beta_c": 10, "beta_s": 1},
      {"name": "B", "weight": "1/3", "lambda0": 0.2, "alpha": 0.5, "lambda_bar": 2.0, "sigma": 0.5, "beta_c": 3, "beta_s": 1},
      {"name": "C", "weight": 0.5, "lambda0": 0.2, "alpha": 0.5, "lambda_bar": 2.0, "sigma": 0.5, "beta_c": 1, "beta_s": 1}
    ]
  },
  "factor": {"kind": "ou", "speed": 1, "level": 0, "vol": 1, "x0": 0, "epsilon": "1/sqrt(N)"},
  "grid": {"horizon": 1.0},
  "seed": {"master": 20130517}
})cfg";

std::string with_replaced(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return text.replace(pos, from.size(), to);
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "test.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(CsvFormat, ShortestRoundTrip) {
  EXPECT_EQ(csv::format_number(0.1), "0.1");
  EXPECT_EQ(csv::format_number(33.0), "33");
  EXPECT_EQ(csv::format_number(-2.5e-300), "-2.5e-300");
  const double third = 1.0 / 3.0;
  EXPECT_EQ(csv::parse_number(csv::format_number(third)), third);
  EXPECT_EQ(csv::format_number(std::nan("")), "nan");
  EXPECT_TRUE(std::isinf(csv::parse_number("-inf")));
}

TEST(CsvWriter, QuotesAndRoundTrip) {
  csv::Writer w({"name", "value"});
  w.row({"plain", 1.5});
  w.row({"comma, inside", 2.0});
  w.row({"quote \"here\"", std::int64_t{3}});
  w.row({"line\nbreak", 0.25});
  const std::string text = w.str();
  EXPECT_NE(text.find("\"comma, inside\""), std::string::npos);
  EXPECT_NE(text.find("\"quote \"\"here\"\"\""), std::string::npos);
  EXPECT_NE(text.find("\r\n"), std::string::npos);
  const auto t = csv::parse(text);
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.header, (std::vector<std::string>{"name", "value"}));
  EXPECT_EQ(t.rows[1][0], "comma, inside");
  EXPECT_EQ(t.rows[2][0], "quote \"here\"");
  EXPECT_EQ(t.rows[3][0], "line\nbreak");
  EXPECT_EQ(t.numbers("value"), (std::vector<double>{1.5, 2.0, 3.0, 0.25}));
}

TEST(CsvParse, AcceptsLfAndRejectsRaggedRows) {
  const auto t = csv::parse("a,b\n1,2\n3,4\n");
  EXPECT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.column("b"), 1u);
  EXPECT_THROW(t.column("c"), std::invalid_argument);
  EXPECT_THROW(csv::parse("a,b\n1,2,3\n"), std::invalid_argument);
  EXPECT_THROW(csv::parse("a,b\n\"unterminated,2\n"), std::invalid_argument);
}

TEST(Config, ParsesTable1) {
  const auto cfg = parse_config(kTable1, "table1.json");
  EXPECT_EQ(cfg.pool.n_names, 200u);
  ASSERT_EQ(cfg.pool.groups.size(), 3u);
  EXPECT_EQ(cfg.pool.groups[0].weight, 1.0 / 6.0);
  EXPECT_EQ(cfg.pool.groups[1].params.beta_c, 3.0);
  EXPECT_EQ(cfg.group_names, (std::vector<std::string>{"A", "B", "C"}));
  EXPECT_EQ(cfg.factor.kind, FactorKind::ou);
  EXPECT_EQ(cfg.factor.epsilon, 1.0 / std::sqrt(200.0));
  EXPECT_EQ(cfg.grid.n_steps, 500u);
  EXPECT_EQ(cfg.seed.master_seed, 20130517u);
  EXPECT_EQ(cfg.seed.run, 0u);
  EXPECT_NEAR(cfg.ldp_c(), 1.0, 1e-15);
}

TEST(Config, ResolvedRoundTrip) {
  const auto cfg = parse_config(kTable1, "table1.json");
  const auto again = parse_config(cfg.resolved().dump(2), "resolved.json");
  EXPECT_EQ(again.pool.groups, cfg.pool.groups);
  EXPECT_EQ(again.factor.epsilon, cfg.factor.epsilon);
  EXPECT_EQ(again.resolved(), cfg.resolved());
}

TEST(Config, UnknownKeysAreRejectedWithLine) {
  const auto msg = config_error(with_replaced(kTable1, "\"grid\"", "\"gird\""));
  EXPECT_NE(msg.find("test.json:11"), std::string::npos) << msg;
  EXPECT_NE(msg.find("gird"), std::string::npos) << msg;

  const auto nested = config_error(with_replaced(kTable1, "\"lambda_bar\": 2.0, \"sigma\": 0.5, \"beta_c\": 3",
                                                 "\"lambda_bar\": 2.0, \"sigmma\": 0.5, \"beta_c\": 3"));
  EXPECT_NE(nested.find("test.json:6"), std::string::npos) << nested;
  EXPECT_NE(nested.find("pool.groups[1].sigmma"), std::string::npos) << nested;
}

TEST(Config, ValidationErrorsPointAtField) {
  const auto msg = config_error(with_replaced(kTable1, "\"alpha\": 0.5, \"lambda_bar\": 2.0, \"sigma\": 0.5, \"beta_c\": 1,",
                                              "\"alpha\": -0.5, \"lambda_bar\": 2.0, \"sigma\": 0.5, \"beta_c\": 1,"));
  EXPECT_NE(msg.find("test.json:7"), std::string::npos) << msg;
  EXPECT_NE(msg.find("pool.groups[2].alpha"), std::string::npos) << msg;
  EXPECT_NE(msg.find("nonnegative"), std::string::npos) << msg;

  const auto sum = config_error(with_replaced(kTable1, "\"weight\": 0.5", "\"weight\": 0.6"));
  EXPECT_NE(sum.find("weights sum to"), std::string::npos) << sum;
}

TEST(Config, TypeAndSyntaxErrors) {
  const auto type = config_error(with_replaced(kTable1, "\"n_names\": 200", "\"n_names\": \"many\""));
  EXPECT_NE(type.find("pool.n_names"), std::string::npos) << type;
  EXPECT_NE(type.find("test.json:3"), std::string::npos) << type;

  const auto syntax = config_error(with_replaced(kTable1, "\"grid\": {", "\"grid\" {"));
  EXPECT_NE(syntax.find("test.json:11"), std::string::npos) << syntax;

  const auto missing = config_error(with_replaced(kTable1, "\"seed\": {\"master\": 20130517}", "\"seed\": {}"));
  EXPECT_NE(missing.find("seed.master"), std::string::npos) << missing;

  const auto eps = config_error(with_replaced(kTable1, "\"1/sqrt(N)\"", "\"1/N\""));
  EXPECT_NE(eps.find("factor.epsilon"), std::string::npos) << eps;
}

TEST(Config, FactorNoneNeedsNoParameters) {
  auto text = with_replaced(kTable1, R"cfg({"kind": "ou", "speed": 1, "level": 0, "vol": 1, "x0": 0, "epsilon": "1/sqrt(N)"})cfg",
                            R"({"kind": "none"})");
  const auto cfg = parse_config(text, "none.json");
  EXPECT_EQ(cfg.factor.kind, FactorKind::none);
  EXPECT_EQ(cfg.factor.epsilon, 0.0);
}

TEST(Manifest, HashIsStableAndSensitive) {
  const auto cfg = parse_config(kTable1, "table1.json");
  nlohmann::json opts = {{"paths", 100}};
  const Manifest a = make_manifest("simulate", cfg, opts);
  const Manifest b = make_manifest("simulate", cfg, opts);
  EXPECT_EQ(a.config_hash, b.config_hash);
  EXPECT_EQ(a.config_hash.size(), 16u);
  auto other = cfg;
  other.seed.master_seed += 1;
  EXPECT_NE(make_manifest("simulate", other, opts).config_hash, a.config_hash);
  EXPECT_NE(make_manifest("simulate", cfg, {{"paths", 101}}).config_hash, a.config_hash);
  const auto j = a.to_json();
  EXPECT_EQ(j.at("subcommand"), "simulate");
  EXPECT_EQ(j.at("seed").at("master"), 20130517u);
  EXPECT_TRUE(j.contains("tool_version"));
  EXPECT_TRUE(j.contains("wall_time_seconds"));
}

TEST(AtomicWrite, ReplacesWithoutLeftovers) {
  const auto dir = std::filesystem::temp_directory_path() / "defclust_io_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto file = dir / "out.csv";
  write_file_atomic(file, "first\n");
  write_file_atomic(file, "second\n");
  std::ifstream in(file);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "second\n");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++entries;
  EXPECT_EQ(entries, 1u);
  std::filesystem::remove_all(dir);
}
