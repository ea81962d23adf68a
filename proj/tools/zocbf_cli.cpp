#include <CLI11.hpp>

#include <iostream>

#include "zocbf/cli.hpp"

namespace {

struct Overrides
{
  std::string out_dir;
  std::string backend;
  int steps = 0;
  int substeps = 0;
};

zocbf::cli::ExperimentConfig load_with_overrides(const std::string & path, const Overrides & o)
{
  zocbf::cli::ExperimentConfig cfg = zocbf::cli::load_config(path);
  if (!o.out_dir.empty()) { cfg.output_dir = o.out_dir; }
  if (!o.backend.empty()) { cfg.backend = o.backend; }
  if (o.steps != 0) { cfg.steps = o.steps; }
  if (o.substeps != 0) { cfg.substeps = o.substeps; }
  zocbf::cli::validate(cfg);
  return cfg;
}

void add_overrides(CLI::App * cmd, Overrides & o)
{
  cmd->add_option("--out-dir", o.out_dir, "Output directory (overrides output.dir)");
  cmd->add_option("--backend", o.backend, "Filter backend (overrides backend)");
  cmd->add_option("--steps", o.steps, "Number of sampling periods (overrides steps)");
  cmd->add_option("--substeps", o.substeps, "RK4 substeps per period (overrides substeps)");
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Zero-order barrier safety filters: run and sweep sampled-data experiments.\n"
               "ZOCBF_WORKERS sets the worker count of the sampling backend."};
  app.set_version_flag("--version", zocbf::cli::version());
  app.require_subcommand(1);

  std::string config;
  std::string grid;
  std::string log;
  Overrides run_o;
  Overrides sweep_o;

  CLI::App * run = app.add_subcommand("run", "Simulate one config; exit 0 iff safe and always feasible");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  add_overrides(run, run_o);

  CLI::App * sweep = app.add_subcommand("sweep", "Run a config over a parameter grid");
  sweep->add_option("config", config, "Experiment config (JSON)")->required();
  sweep->add_option("--grid", grid, "e.g. \"gamma_c=0.25,0.5,1;backend=linearized_linear,sampling(S=101)\"")
      ->required();
  add_overrides(sweep, sweep_o);

  CLI::App * report = app.add_subcommand("report", "Summarize a trajectory CSV");
  report->add_option("log", log, "Trajectory CSV written by run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : zocbf::cli::exit_config;
  }

  try {
    if (*run) {
      const auto cfg = load_with_overrides(config, run_o);
      const auto outcome = zocbf::cli::run_experiment(cfg);
      std::cout << "trajectory: " << outcome.trajectory.string() << '\n'
                << "summary:    " << outcome.summary.string() << '\n'
                << "min h:      " << outcome.report.min_h_overall << '\n';
      if (outcome.report.first_violation) {
        std::cout << "violation at t = " << *outcome.report.first_violation << " s\n";
      }
      if (outcome.report.infeasible_steps > 0) {
        std::cout << "infeasible steps: " << outcome.report.infeasible_steps << '\n';
      }
      if (!outcome.error.empty()) { std::cerr << "error: " << outcome.error << '\n'; }
      return outcome.exit_code;
    }
    if (*sweep) {
      const auto cfg = load_with_overrides(config, sweep_o);
      const auto axes = zocbf::cli::parse_grid(grid);
      std::cout << zocbf::cli::run_sweep(cfg, axes).string() << '\n';
      return zocbf::cli::exit_ok;
    }
    return zocbf::cli::report_log(log, std::cout);
  } catch (const zocbf::cli::ConfigError & e) {
    std::cerr << "config error: " << e.what() << '\n';
    return zocbf::cli::exit_config;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return zocbf::cli::exit_runtime;
  }
}
