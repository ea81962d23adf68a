#ifndef ZOCBF_CLI_HPP_
#define ZOCBF_CLI_HPP_

/**
 * @file
 * @brief Experiment configs and the run / sweep / report commands behind the `zocbf` tool.
 *
 * Config schema (JSON, every field optional except `model`; defaults depend on the model):
 *
 *   model              "double_integrator_h1" | "double_integrator_h2" | "rollover"
 *   backend            "no_filter" | "linearized_linear" | "linearized_quadratic"
 *                      | "rk_nonlinear(p=1|2|4)" | "sampling(S=<int>)"
 *   sampling_substeps  RK4 substeps used by the sampling backend's flow
 *   taylor             "half" | "literal" (curvature of the quadratic model)
 *   T, delta, gamma_c, mismatch
 *   x0, u_init         arrays; u_init may be null (then u_init = u_nom(x0, 0))
 *   steps, substeps
 *   box                {"lower": [...], "upper": [...]}
 *   model_params       see ModelParams
 *   output             {"dir": "...", "name": "..."}
 */

#include "zocbf/models.hpp"
#include "zocbf/simulation.hpp"
#include "zocbf/solvers.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace zocbf::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  exit_ok = 0,
  exit_unsafe = 1,   ///< a violation or an infeasible filter step
  exit_config = 2,   ///< parse, validation or usage error
  exit_runtime = 3,  ///< the simulation aborted (partial log written)
};

/// Parse or validation failure; `field` is the offending config key ("box.lower", ...).
class ConfigError : public Error
{
public:
  ConfigError(std::string field, const std::string & message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field))
  {}
  const std::string & field() const noexcept { return field_; }

private:
  std::string field_;
};

struct ModelParams
{
  // double integrator
  double limit = 10.0;  ///< h1 = limit - p
  double level = 10.0;  ///< h2 = level - p^2
  double u_nom = 0.0;   ///< constant nominal input

  // rollover robot
  double terrain_amplitude = 0.35;
  double terrain_freq_x = 0.8;
  double terrain_freq_y = 0.8;
  double g_grav = 9.81;
  double track = 0.5;
  double h_cg = 0.25;
  double k_v = 1.2;
  double k_omega = 2.5;
  std::vector<std::array<double, 2>> waypoints;
  double switch_radius = 0.3;

  bool operator==(const ModelParams &) const = default;
};

struct ExperimentConfig
{
  std::string model;
  std::string backend = "linearized_linear";
  int sampling_substeps = 1;
  std::string taylor = "half";
  double T = 0.1;
  double delta = 0.01;
  double gamma_c = 1.0;
  double mismatch = 0.0;
  std::vector<double> x0;
  std::optional<std::vector<double>> u_init;
  int steps = 100;
  int substeps = 10;
  std::vector<double> box_lower;
  std::vector<double> box_upper;
  ModelParams model_params;
  std::string output_dir = "out";
  std::string output_name;

  bool operator==(const ExperimentConfig &) const = default;
};

/// Defaults of a model id. Throws ConfigError("model") for an unknown id.
ExperimentConfig default_config(const std::string & model);

/// Parses and validates. Unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json & j);
/// Reads a file; JSON syntax errors are reported with their line and column.
ExperimentConfig load_config(const std::filesystem::path & path);
/// Fully resolved config; parse_config(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig & cfg);
/// Throws ConfigError naming the first invalid field.
void validate(const ExperimentConfig & cfg);

/// "rk_nonlinear(p=4)" -> FilterBackend. Throws ConfigError("backend").
FilterBackend parse_backend(const std::string & spec, int sampling_substeps = 1,
                            TaylorCurvature curvature = TaylorCurvature::half);

/// Everything `simulate` needs, built from a config.
struct Experiment
{
  ControlAffineSystem sys;
  std::vector<ConstraintFunction> constraints;
  ZocbfParams params;
  FilterBackend backend;
  NominalPolicy policy;
  Vector x0;
  InputBox box;
  SimulationSetup setup;
};

Experiment build_experiment(const ExperimentConfig & cfg);

/// Summary written next to the trajectory log.
nlohmann::json summary_json(const ExperimentConfig & cfg, const SimulationLog & log,
                            const SafetyReport & report);

/// Trajectory CSV: time, x_i, u_i, u_nom_i, status, margin_<h>, then h_<h>_s<j> for the
/// j = 0..substeps fine-grid points of the step.
void write_trajectory_csv(std::ostream & out, const SimulationLog & log);

struct RunOutcome
{
  int exit_code = exit_ok;
  std::filesystem::path trajectory;
  std::filesystem::path summary;
  SafetyReport report;
  std::string error;
};

/// Simulates, writes both outputs to cfg.output_dir and applies the exit-status contract.
RunOutcome run_experiment(const ExperimentConfig & cfg);

/// One axis of a sweep grid.
struct GridAxis
{
  std::string key;  ///< gamma_c | delta | T | backend
  std::vector<std::string> values;
};

/// "gamma_c=0.25,0.5;backend=linearized_linear,sampling(S=101)". Blank spec -> no axes.
std::vector<GridAxis> parse_grid(const std::string & spec);

/// Cross product in row-major order of the axes (last axis fastest). An empty axis list yields
/// no cells. Writes sweep.csv into cfg.output_dir and returns its path.
std::filesystem::path run_sweep(const ExperimentConfig & cfg, const std::vector<GridAxis> & grid);

/// Recomputes the safety summary from a trajectory CSV and prints it as JSON.
int report_log(const std::filesystem::path & csv, std::ostream & out);

std::string version();

}  // namespace zocbf::cli

#endif  // ZOCBF_CLI_HPP_
