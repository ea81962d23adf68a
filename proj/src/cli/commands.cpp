#include "zocbf/cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace zocbf::cli {

using nlohmann::json;

namespace {

int status_code(FilterStatus s)
{
  switch (s) {
    case FilterStatus::optimal: return 0;
    case FilterStatus::feasible_suboptimal: return 1;
    case FilterStatus::infeasible: return 2;
  }
  return 2;
}

json optional_time(const std::optional<double> & t) { return t ? json(*t) : json(nullptr); }

// JSON has no infinity; an empty log reports null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<std::string> split(const std::string & s, char sep)
{
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) { out.push_back(item); }
  if (!s.empty() && s.back() == sep) { out.emplace_back(); }
  return out;
}

std::string trim(const std::string & s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) { return {}; }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_grid_number(const std::string & text, const std::string & key)
{
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || used != text.size()) { throw ConfigError("grid." + key, "not a number: '" + text + "'"); }
  return v;
}

int exit_code_for(const SafetyReport & rep)
{
  return (rep.first_violation || rep.infeasible_steps > 0) ? exit_unsafe : exit_ok;
}

}  // namespace

std::string version() { return ZOCBF_VERSION; }

json summary_json(const ExperimentConfig & cfg, const SimulationLog & log, const SafetyReport & rep)
{
  json min_h = json::object();
  for (std::size_t i = 0; i < log.constraint_names.size(); ++i) {
    min_h[log.constraint_names[i]] = finite_or_null(rep.min_h[i]);
  }
  return {{"version", version()},
          {"config", to_json(cfg)},
          {"steps", rep.steps},
          {"min_h", min_h},
          {"min_h_overall", finite_or_null(rep.min_h_overall)},
          {"first_violation", optional_time(rep.first_violation)},
          {"interventions", rep.interventions},
          {"max_intervention", rep.max_intervention},
          {"mean_solve_time", rep.mean_solve_time},
          {"infeasible_steps", rep.infeasible_steps}};
}

void write_trajectory_csv(std::ostream & out, const SimulationLog & log)
{
  const std::size_t K = log.steps();
  const Eigen::Index n = log.states.empty() ? 0 : log.states.front().size();
  const Eigen::Index m = K == 0 ? 0 : log.inputs.front().size();
  const int points = log.substeps + 1;

  out << "time";
  for (Eigen::Index i = 0; i < n; ++i) { out << ",x" << i; }
  for (Eigen::Index i = 0; i < m; ++i) { out << ",u" << i; }
  for (Eigen::Index i = 0; i < m; ++i) { out << ",u_nom" << i; }
  out << ",status";
  for (const auto & name : log.constraint_names) { out << ",margin_" << name; }
  for (const auto & name : log.constraint_names) {
    for (int j = 0; j < points; ++j) { out << ",h_" << name << "_s" << j; }
  }
  out << '\n';

  out << std::setprecision(17);
  for (std::size_t k = 0; k < K; ++k) {
    out << log.times[k];
    for (Eigen::Index i = 0; i < n; ++i) { out << ',' << log.states[k][i]; }
    for (Eigen::Index i = 0; i < m; ++i) { out << ',' << log.inputs[k][i]; }
    for (Eigen::Index i = 0; i < m; ++i) { out << ',' << log.nominal[k][i]; }
    out << ',' << status_code(log.records[k].status);
    for (Eigen::Index c = 0; c < log.step_margins[k].size(); ++c) { out << ',' << log.step_margins[k][c]; }
    for (std::size_t c = 0; c < log.constraints(); ++c) {
      for (int j = 0; j < points; ++j) {
        out << ',' << log.fine_h[k * static_cast<std::size_t>(points) + static_cast<std::size_t>(j)]
                                [static_cast<Eigen::Index>(c)];
      }
    }
    out << '\n';
  }
}

RunOutcome run_experiment(const ExperimentConfig & cfg)
{
  Experiment e = build_experiment(cfg);
  RunOutcome outcome;
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  outcome.trajectory = dir / (cfg.output_name + ".csv");
  outcome.summary = dir / (cfg.output_name + ".summary.json");

  SimulationLog log;
  try {
    log = simulate(e.sys, e.constraints, e.params, e.backend, e.policy, e.x0, e.box, e.setup);
  } catch (const SimulationAborted & ex) {
    log = ex.partial_log();
    outcome.error = ex.what();
  }
  outcome.report = safety_report(log);

  std::ofstream csv(outcome.trajectory);
  write_trajectory_csv(csv, log);
  json summary = summary_json(cfg, log, outcome.report);
  summary["aborted"] = !outcome.error.empty();
  if (!outcome.error.empty()) { summary["error"] = outcome.error; }
  std::ofstream(outcome.summary) << summary.dump(2) << '\n';

  outcome.exit_code = outcome.error.empty() ? exit_code_for(outcome.report) : exit_runtime;
  return outcome;
}

std::vector<GridAxis> parse_grid(const std::string & spec)
{
  std::vector<GridAxis> axes;
  if (trim(spec).empty()) { return axes; }
  for (const std::string & part : split(spec, ';')) {
    const std::string item = trim(part);
    if (item.empty()) { continue; }
    const auto eq = item.find('=');
    if (eq == std::string::npos) { throw ConfigError("grid", "expected key=v1,v2,... in '" + item + "'"); }
    GridAxis axis;
    axis.key = trim(item.substr(0, eq));
    if (axis.key != "gamma_c" && axis.key != "delta" && axis.key != "T" && axis.key != "backend") {
      throw ConfigError("grid." + axis.key, "unknown sweep key (expected gamma_c, delta, T or backend)");
    }
    for (const auto & a : axes) {
      if (a.key == axis.key) { throw ConfigError("grid." + axis.key, "repeated key"); }
    }
    const std::string values = item.substr(eq + 1);
    if (!trim(values).empty()) {
      for (const std::string & v : split(values, ',')) {
        const std::string value = trim(v);
        if (value.empty()) { throw ConfigError("grid." + axis.key, "empty value"); }
        if (axis.key != "backend") { parse_grid_number(value, axis.key); }
        axis.values.push_back(value);
      }
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

std::filesystem::path run_sweep(const ExperimentConfig & cfg, const std::vector<GridAxis> & grid)
{
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  const std::filesystem::path path = dir / "sweep.csv";
  std::ofstream out(path);
  out << "cell,gamma_c,delta,T,backend,min_h,first_violation,interventions,max_intervention,mean_solve_time,"
         "infeasible_steps,error\n";
  out << std::setprecision(17);

  std::size_t cells = grid.empty() ? 0 : 1;
  for (const auto & axis : grid) { cells *= axis.values.size(); }

  for (std::size_t cell = 0; cell < cells; ++cell) {
    ExperimentConfig c = cfg;
    std::size_t rest = cell;
    for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
      const std::string & value = it->values[rest % it->values.size()];
      rest /= it->values.size();
      if (it->key == "backend") {
        c.backend = value;
      } else if (it->key == "gamma_c") {
        c.gamma_c = parse_grid_number(value, it->key);
      } else if (it->key == "delta") {
        c.delta = parse_grid_number(value, it->key);
      } else {
        c.T = parse_grid_number(value, it->key);
      }
    }
    out << cell << ',' << c.gamma_c << ',' << c.delta << ',' << c.T << ',' << c.backend << ',';
    try {
      Experiment e = build_experiment(c);
      const SimulationLog log = simulate(e.sys, e.constraints, e.params, e.backend, e.policy, e.x0, e.box, e.setup);
      const SafetyReport rep = safety_report(log);
      out << rep.min_h_overall << ',';
      if (rep.first_violation) { out << *rep.first_violation; }
      out << ',' << rep.interventions << ',' << rep.max_intervention << ',' << rep.mean_solve_time << ','
          << rep.infeasible_steps << ",\n";
    } catch (const std::exception & ex) {
      std::string msg = ex.what();
      for (char & ch : msg) {
        if (ch == ',' || ch == '\n') { ch = ';'; }
      }
      out << ",,,,,," << msg << '\n';
    }
  }
  return path;
}

int report_log(const std::filesystem::path & csv, std::ostream & out)
{
  std::ifstream in(csv);
  if (!in) { throw ConfigError("", "cannot open log '" + csv.string() + "'"); }
  std::string line;
  if (!std::getline(in, line)) { throw ConfigError("", "empty log '" + csv.string() + "'"); }
  const std::vector<std::string> header = split(line, ',');

  std::vector<std::size_t> u_cols;
  std::vector<std::size_t> nom_cols;
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> h_cols;
  std::optional<std::size_t> status_col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string & h = header[i];
    if (h.rfind("u_nom", 0) == 0) {
      nom_cols.push_back(i);
    } else if (h.size() > 1 && h[0] == 'u') {
      u_cols.push_back(i);
    } else if (h == "status") {
      status_col = i;
    } else if (h.rfind("h_", 0) == 0) {
      const auto s = h.rfind("_s");
      const std::string name = h.substr(2, s - 2);
      if (names.empty() || names.back() != name) {
        names.push_back(name);
        h_cols.emplace_back();
      }
      h_cols.back().push_back(i);
    }
  }
  if (header.empty() || header[0] != "time" || names.empty() || u_cols.size() != nom_cols.size() || !status_col) {
    throw ConfigError("", "'" + csv.string() + "' is not a trajectory log");
  }

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) { continue; }
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw ConfigError("", csv.string() + ":" + std::to_string(lineno) + ": expected "
                                + std::to_string(header.size()) + " columns");
    }
    std::vector<double> row;
    for (const auto & cell : cells) { row.push_back(std::stod(cell)); }
    rows.push_back(std::move(row));
  }

  const std::size_t points = h_cols.front().size();
  const double dt = rows.size() > 1 && points > 1 ? (rows[1][0] - rows[0][0]) / static_cast<double>(points - 1) : 0.0;
  std::vector<double> min_h(names.size(), std::numeric_limits<double>::infinity());
  std::optional<double> first_violation;
  int interventions = 0;
  int infeasible = 0;
  double max_intervention = 0.0;
  for (const auto & row : rows) {
    for (std::size_t j = 0; j < points; ++j) {
      for (std::size_t c = 0; c < names.size(); ++c) {
        const double v = row[h_cols[c][j]];
        min_h[c] = std::min(min_h[c], v);
        if (!first_violation && v < -1e-9) { first_violation = row[0] + static_cast<double>(j) * dt; }
      }
    }
    double dev2 = 0.0;
    for (std::size_t i = 0; i < u_cols.size(); ++i) {
      dev2 += (row[u_cols[i]] - row[nom_cols[i]]) * (row[u_cols[i]] - row[nom_cols[i]]);
    }
    const double dev = std::sqrt(dev2);
    if (dev > 1e-9) { ++interventions; }
    max_intervention = std::max(max_intervention, dev);
    if (row[*status_col] == 2.0) { ++infeasible; }
  }

  json mh = json::object();
  double overall = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < names.size(); ++c) {
    mh[names[c]] = finite_or_null(min_h[c]);
    overall = std::min(overall, min_h[c]);
  }
  const json summary = {{"steps", rows.size()},
                        {"min_h", mh},
                        {"min_h_overall", finite_or_null(overall)},
                        {"first_violation", optional_time(first_violation)},
                        {"interventions", interventions},
                        {"max_intervention", max_intervention},
                        {"infeasible_steps", infeasible}};
  out << summary.dump(2) << '\n';
  return (first_violation || infeasible > 0) ? exit_unsafe : exit_ok;
}

}  // namespace zocbf::cli
