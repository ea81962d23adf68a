#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "zocbf/cli.hpp"

using namespace zocbf;
using namespace zocbf::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kConfigs = ZOCBF_CONFIG_DIR;

fs::path scratch(const std::string & name)
{
  const fs::path dir = fs::temp_directory_path() / ("zocbf_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<std::string>> read_csv(const fs::path & path)
{
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) { row.push_back(cell); }
    if (!line.empty() && line.back() == ',') { row.emplace_back(); }
    rows.push_back(row);
  }
  return rows;
}

std::string error_field(const json & j)
{
  try {
    parse_config(j);
  } catch (const ConfigError & e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST(Config, BundledConfigsParseAndRoundTrip)
{
  for (const char * name : {"double_integrator_h1.json", "double_integrator_h2.json", "rollover.json"}) {
    const ExperimentConfig c = load_config(kConfigs / name);
    EXPECT_EQ(parse_config(to_json(c)), c) << name;
    EXPECT_EQ(to_json(parse_config(to_json(c))), to_json(c)) << name;
  }
}

TEST(Config, DefaultsMatchTheBundledFiles)
{
  EXPECT_EQ(load_config(kConfigs / "double_integrator_h1.json"), default_config("double_integrator_h1"));
  EXPECT_EQ(load_config(kConfigs / "rollover.json"), default_config("rollover"));
}

TEST(Config, ValidationNamesTheField)
{
  EXPECT_EQ(error_field({{"model", "double_integrator_h1"}, {"T", 0.0}}), "T");
  EXPECT_EQ(error_field({{"model", "double_integrator_h1"}, {"gamma_c", 1.5}}), "gamma_c");
  EXPECT_EQ(error_field({{"model", "double_integrator_h1"}, {"x0", {1.0}}}), "x0");
  EXPECT_EQ(error_field({{"model", "double_integrator_h1"}, {"box", {{"lower", {1.0, 2.0}}}}}), "box.lower");
  EXPECT_EQ(error_field({{"model", "double_integrator_h1"}, {"backend", "rk_nonlinear(p=3)"}}), "backend");
  EXPECT_EQ(error_field({{"model", "double_integrator_h1"}, {"backend", "newton"}}), "backend");
  EXPECT_EQ(error_field({{"model", "rollover"}, {"model_params", {{"waypoints", json::array()}}}}),
            "model_params.waypoints");
  EXPECT_EQ(error_field({{"model", "unicycle"}}), "model");
  EXPECT_EQ(error_field({{"T", 0.1}}), "model");
}

TEST(Config, UnknownKeysAreRejected)
{
  try {
    parse_config({{"model", "double_integrator_h1"}, {"gama_c", 0.5}});
    FAIL();
  } catch (const ConfigError & e) {
    EXPECT_NE(std::string(e.what()).find("gama_c"), std::string::npos);
  }
}

TEST(Config, SyntaxErrorsReportTheLine)
{
  const fs::path dir = scratch("syntax");
  const fs::path file = dir / "bad.json";
  std::ofstream(file) << "{\n  \"model\": \"double_integrator_h1\",\n  \"T\": ,\n}\n";
  try {
    load_config(file);
    FAIL();
  } catch (const ConfigError & e) {
    EXPECT_NE(std::string(e.what()).find("bad.json:3:"), std::string::npos) << e.what();
  }
}

TEST(Config, BackendSpecs)
{
  EXPECT_EQ(parse_backend("rk_nonlinear(p=2)").order, 2);
  EXPECT_EQ(parse_backend("sampling(S=51)", 3).samples, 51);
  EXPECT_EQ(parse_backend("sampling(S=51)", 3).sampling_substeps, 3);
  EXPECT_EQ(parse_backend("linearized_quadratic", 1, TaylorCurvature::literal).curvature, TaylorCurvature::literal);
  EXPECT_EQ(parse_backend("no_filter").kind, FilterBackend::Kind::no_filter);
  EXPECT_THROW(parse_backend("sampling(S=2)"), ConfigError);
  EXPECT_EQ(parse_backend("rk_nonlinear").order, 4);
  EXPECT_THROW(parse_backend("rk_nonlinear(p=)"), ConfigError);
}

TEST(Run, UnfilteredDoubleIntegratorIsFlaggedUnsafe)
{
  ExperimentConfig c = default_config("double_integrator_h1");
  c.backend = "no_filter";
  c.output_dir = scratch("unfiltered").string();
  const RunOutcome r = run_experiment(c);
  EXPECT_EQ(r.exit_code, exit_unsafe);
  ASSERT_TRUE(r.report.first_violation.has_value());
  EXPECT_NEAR(*r.report.first_violation, 5.0, 0.011);
  EXPECT_TRUE(fs::exists(r.trajectory));
  std::ifstream in(r.summary);
  const json s = json::parse(in);
  EXPECT_NEAR(s["first_violation"].get<double>(), *r.report.first_violation, 0.0);
  EXPECT_EQ(s["config"]["backend"], "no_filter");
}

TEST(Run, BundledPositionLimitConfigIsSafe)
{
  ExperimentConfig c = load_config(kConfigs / "double_integrator_h1.json");
  c.output_dir = scratch("bundled_h1").string();
  EXPECT_EQ(run_experiment(c).exit_code, exit_ok);
}

TEST(Run, TrajectoryCsvIsRectangular)
{
  ExperimentConfig c = default_config("rollover");
  c.steps = 20;
  c.output_dir = scratch("rect").string();
  const RunOutcome r = run_experiment(c);
  const auto rows = read_csv(r.trajectory);
  ASSERT_EQ(rows.size(), 21u);
  // time, 3 states, 2 inputs, 2 nominal inputs, status, 2 margins, 2 x 11 fine-grid values
  EXPECT_EQ(rows[0].size(), 1u + 3 + 2 + 2 + 1 + 2 + 2 * 11);
  for (const auto & row : rows) { EXPECT_EQ(row.size(), rows[0].size()); }
  EXPECT_EQ(rows[0][0], "time");
}

TEST(Report, MatchesTheRunSummary)
{
  for (const char * backend : {"no_filter", "linearized_quadratic"}) {
    ExperimentConfig c = default_config("double_integrator_h2");
    c.backend = backend;
    c.output_dir = scratch(std::string("report_") + backend).string();
    const RunOutcome r = run_experiment(c);
    std::ostringstream out;
    const int code = report_log(r.trajectory, out);
    EXPECT_EQ(code, r.exit_code) << backend;
    const json j = json::parse(out.str());
    EXPECT_NEAR(j["min_h_overall"].get<double>(), r.report.min_h_overall, 1e-12) << backend;
    EXPECT_EQ(j["interventions"].get<int>(), r.report.interventions) << backend;
    EXPECT_EQ(j["infeasible_steps"].get<int>(), r.report.infeasible_steps) << backend;
    if (r.report.first_violation) {
      EXPECT_NEAR(j["first_violation"].get<double>(), *r.report.first_violation, 1e-9) << backend;
    } else {
      EXPECT_TRUE(j["first_violation"].is_null()) << backend;
    }
  }
}

TEST(Grid, Parsing)
{
  const auto g = parse_grid("gamma_c=0.25,0.5;backend=linearized_linear,sampling(S=101)");
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].key, "gamma_c");
  EXPECT_EQ(g[0].values, (std::vector<std::string>{"0.25", "0.5"}));
  EXPECT_EQ(g[1].values, (std::vector<std::string>{"linearized_linear", "sampling(S=101)"}));
  EXPECT_TRUE(parse_grid("").empty());
  EXPECT_TRUE(parse_grid("  ").empty());
  EXPECT_THROW(parse_grid("alpha=1"), ConfigError);
  EXPECT_THROW(parse_grid("delta=a"), ConfigError);
  EXPECT_THROW(parse_grid("delta=0.1;delta=0.2"), ConfigError);
}

TEST(Sweep, EmptyGridWritesOnlyTheHeader)
{
  ExperimentConfig c = default_config("double_integrator_h1");
  c.output_dir = scratch("empty_sweep").string();
  const auto rows = read_csv(run_sweep(c, {}));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0][0], "cell");
}

TEST(Sweep, DecayRatesKeepThePositionLimit)
{
  ExperimentConfig c = default_config("double_integrator_h1");
  c.output_dir = scratch("gamma_sweep").string();
  const auto rows = read_csv(run_sweep(c, parse_grid("gamma_c=0.25,0.5,1.0")));
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_TRUE(rows[i][11].empty()) << rows[i][11];
    EXPECT_GE(std::stod(rows[i][5]), 0.0) << "gamma_c=" << rows[i][1];
  }
}

TEST(Sweep, LargerRobustnessMarginIsMoreConservative)
{
  ExperimentConfig c = default_config("double_integrator_h1");
  c.gamma_c = 0.5;
  c.output_dir = scratch("delta_sweep").string();
  const auto rows = read_csv(run_sweep(c, parse_grid("delta=0.0,0.05,0.2")));
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 2; i < rows.size(); ++i) { EXPECT_GE(std::stod(rows[i][5]), std::stod(rows[i - 1][5]) - 1e-12); }
}

TEST(Sweep, CellsRunRowMajorAndRecordErrors)
{
  ExperimentConfig c = default_config("double_integrator_h2");
  c.steps = 5;
  c.output_dir = scratch("order_sweep").string();
  const auto rows = read_csv(run_sweep(c, parse_grid("T=0.1,-1;backend=linearized_linear,no_filter")));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[1][4], "linearized_linear");
  EXPECT_EQ(rows[2][4], "no_filter");
  EXPECT_EQ(rows[3][3], "-1");
  EXPECT_TRUE(rows[1][11].empty());
  EXPECT_FALSE(rows[3][11].empty());
  EXPECT_FALSE(rows[4][11].empty());
}

TEST(Cli, VersionIsSet) { EXPECT_FALSE(version().empty()); }
