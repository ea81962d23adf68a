#include "zocbf/cli.hpp"

#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace zocbf::cli {

using nlohmann::json;

namespace {

const std::vector<std::array<double, 2>> kDefaultWaypoints = models::RolloverScenario{}.waypoints;

bool is_rollover(const std::string & model) { return model == "rollover"; }

std::pair<int, int> model_dims(const std::string & model)
{
  if (is_rollover(model)) { return {3, 2}; }
  return {2, 1};
}

double get_number(const json & j, const std::string & field)
{
  if (!j.is_number()) { throw ConfigError(field, "expected a number"); }
  const double v = j.get<double>();
  if (!std::isfinite(v)) { throw ConfigError(field, "must be finite"); }
  return v;
}

int get_int(const json & j, const std::string & field)
{
  if (!j.is_number_integer()) { throw ConfigError(field, "expected an integer"); }
  return j.get<int>();
}

std::string get_string(const json & j, const std::string & field)
{
  if (!j.is_string()) { throw ConfigError(field, "expected a string"); }
  return j.get<std::string>();
}

std::vector<double> get_vector(const json & j, const std::string & field)
{
  if (!j.is_array()) { throw ConfigError(field, "expected an array of numbers"); }
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(get_number(j[i], field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

void require_object(const json & j, const std::string & field, const std::set<std::string> & allowed)
{
  if (!j.is_object()) { throw ConfigError(field, "expected an object"); }
  for (const auto & [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError(field.empty() ? key : field + "." + key, "unknown key");
    }
  }
}

void require_positive(double v, const std::string & field)
{
  if (!(v > 0.0) || !std::isfinite(v)) { throw ConfigError(field, "must be positive"); }
}

void require_nonnegative(double v, const std::string & field)
{
  if (!(v >= 0.0) || !std::isfinite(v)) { throw ConfigError(field, "must be nonnegative"); }
}

void parse_model_params(const json & j, const std::string & model, ModelParams & mp)
{
  if (is_rollover(model)) {
    require_object(j, "model_params",
                   {"terrain_amplitude", "terrain_freq_x", "terrain_freq_y", "g_grav", "track", "h_cg", "k_v",
                    "k_omega", "waypoints", "switch_radius"});
  } else {
    require_object(j, "model_params", {"limit", "level", "u_nom"});
  }
  auto number = [&](const char * key, double & dst) {
    if (j.contains(key)) { dst = get_number(j[key], std::string("model_params.") + key); }
  };
  number("limit", mp.limit);
  number("level", mp.level);
  number("u_nom", mp.u_nom);
  number("terrain_amplitude", mp.terrain_amplitude);
  number("terrain_freq_x", mp.terrain_freq_x);
  number("terrain_freq_y", mp.terrain_freq_y);
  number("g_grav", mp.g_grav);
  number("track", mp.track);
  number("h_cg", mp.h_cg);
  number("k_v", mp.k_v);
  number("k_omega", mp.k_omega);
  number("switch_radius", mp.switch_radius);
  if (j.contains("waypoints")) {
    const json & w = j["waypoints"];
    if (!w.is_array()) { throw ConfigError("model_params.waypoints", "expected an array of [x, y] pairs"); }
    mp.waypoints.clear();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::string field = "model_params.waypoints[" + std::to_string(i) + "]";
      const auto xy = get_vector(w[i], field);
      if (xy.size() != 2) { throw ConfigError(field, "expected [x, y]"); }
      mp.waypoints.push_back({xy[0], xy[1]});
    }
  }
}

}  // namespace

ExperimentConfig default_config(const std::string & model)
{
  ExperimentConfig c;
  c.model = model;
  c.output_name = model;
  if (model == "double_integrator_h1" || model == "double_integrator_h2") {
    const models::DoubleIntegratorScenario s;
    c.backend = model == "double_integrator_h1" ? "linearized_linear" : "linearized_quadratic";
    c.T = s.params.T;
    c.delta = s.params.delta;
    c.gamma_c = s.params.gamma.gamma_c;
    c.x0 = {s.x0[0], s.x0[1]};
    c.u_init = std::vector<double>{s.u_init[0]};
    c.steps = s.steps;
    c.substeps = s.substeps;
    c.box_lower = {-10.0};
    c.box_upper = {10.0};
  } else if (is_rollover(model)) {
    const models::RolloverScenario s;
    c.backend = "rk_nonlinear(p=4)";
    c.T = s.params.T;
    c.delta = s.params.delta;
    c.gamma_c = s.params.gamma.gamma_c;
    c.x0 = {s.x0[0], s.x0[1], s.x0[2]};
    c.u_init.reset();
    c.steps = s.steps;
    c.substeps = s.substeps;
    c.box_lower = {s.box.lower[0], s.box.lower[1]};
    c.box_upper = {s.box.upper[0], s.box.upper[1]};
    c.model_params.terrain_amplitude = s.terrain_amplitude;
    c.model_params.terrain_freq_x = s.terrain_freq_x;
    c.model_params.terrain_freq_y = s.terrain_freq_y;
    c.model_params.g_grav = s.robot.g_grav;
    c.model_params.track = s.robot.track;
    c.model_params.h_cg = s.robot.h_cg;
    c.model_params.k_v = s.gains.k_v;
    c.model_params.k_omega = s.gains.k_omega;
    c.model_params.waypoints = s.waypoints;
    c.model_params.switch_radius = s.switch_radius;
  } else {
    throw ConfigError("model", "unknown model '" + model
                                   + "' (expected double_integrator_h1, double_integrator_h2 or rollover)");
  }
  return c;
}

FilterBackend parse_backend(const std::string & spec, int sampling_substeps, TaylorCurvature curvature)
{
  static const std::regex rk(R"(rk_nonlinear(?:\(p=(\d+)\))?)");
  static const std::regex sampling(R"(sampling(?:\(S=(\d+)\))?)");
  std::smatch m;
  FilterBackend b;
  if (spec == "no_filter") {
    b = FilterBackend::no_filter();
  } else if (spec == "linearized_linear") {
    b = FilterBackend::linearized_linear();
  } else if (spec == "linearized_quadratic") {
    b = FilterBackend::linearized_quadratic(curvature);
  } else if (std::regex_match(spec, m, rk)) {
    b = FilterBackend::rk_nonlinear(m[1].matched ? std::stoi(m[1].str()) : 4);
  } else if (std::regex_match(spec, m, sampling)) {
    b = FilterBackend::sampling(m[1].matched ? std::stoi(m[1].str()) : 401);
  } else {
    throw ConfigError("backend", "unknown backend '" + spec + "'");
  }
  b.sampling_substeps = sampling_substeps;
  b.curvature = curvature;
  try {
    b.validate();
  } catch (const std::invalid_argument & e) {
    throw ConfigError("backend", e.what());
  }
  return b;
}

void validate(const ExperimentConfig & c)
{
  const auto [n, m] = model_dims(c.model);
  if (c.taylor != "half" && c.taylor != "literal") { throw ConfigError("taylor", "expected 'half' or 'literal'"); }
  if (c.sampling_substeps < 1) { throw ConfigError("sampling_substeps", "must be >= 1"); }
  parse_backend(c.backend, c.sampling_substeps);
  require_positive(c.T, "T");
  require_nonnegative(c.delta, "delta");
  if (!(c.gamma_c > 0.0 && c.gamma_c <= 1.0)) { throw ConfigError("gamma_c", "must lie in (0, 1]"); }
  require_nonnegative(c.mismatch, "mismatch");
  if (c.x0.size() != static_cast<std::size_t>(n)) {
    throw ConfigError("x0", "expected " + std::to_string(n) + " entries");
  }
  if (c.u_init && c.u_init->size() != static_cast<std::size_t>(m)) {
    throw ConfigError("u_init", "expected " + std::to_string(m) + " entries");
  }
  if (c.steps < 1) { throw ConfigError("steps", "must be >= 1"); }
  if (c.substeps < 1) { throw ConfigError("substeps", "must be >= 1"); }
  if (c.box_lower.size() != static_cast<std::size_t>(m)) {
    throw ConfigError("box.lower", "expected " + std::to_string(m) + " entries");
  }
  if (c.box_upper.size() != static_cast<std::size_t>(m)) {
    throw ConfigError("box.upper", "expected " + std::to_string(m) + " entries");
  }
  for (int i = 0; i < m; ++i) {
    if (!(c.box_lower[i] <= c.box_upper[i])) { throw ConfigError("box", "lower must not exceed upper"); }
  }
  const ModelParams & mp = c.model_params;
  if (is_rollover(c.model)) {
    require_nonnegative(mp.terrain_amplitude, "model_params.terrain_amplitude");
    require_nonnegative(mp.terrain_freq_x, "model_params.terrain_freq_x");
    require_nonnegative(mp.terrain_freq_y, "model_params.terrain_freq_y");
    require_positive(mp.g_grav, "model_params.g_grav");
    require_positive(mp.track, "model_params.track");
    require_positive(mp.h_cg, "model_params.h_cg");
    require_nonnegative(mp.k_v, "model_params.k_v");
    require_nonnegative(mp.k_omega, "model_params.k_omega");
    require_positive(mp.switch_radius, "model_params.switch_radius");
    if (mp.waypoints.empty()) { throw ConfigError("model_params.waypoints", "must not be empty"); }
  }
  if (c.output_name.empty()) { throw ConfigError("output.name", "must not be empty"); }
  if (c.output_dir.empty()) { throw ConfigError("output.dir", "must not be empty"); }
}

ExperimentConfig parse_config(const json & j)
{
  require_object(j, "",
                 {"model", "backend", "sampling_substeps", "taylor", "T", "delta", "gamma_c", "mismatch", "x0",
                  "u_init", "steps", "substeps", "box", "model_params", "output"});
  if (!j.contains("model")) { throw ConfigError("model", "missing"); }
  ExperimentConfig c = default_config(get_string(j["model"], "model"));

  if (j.contains("backend")) { c.backend = get_string(j["backend"], "backend"); }
  if (j.contains("sampling_substeps")) { c.sampling_substeps = get_int(j["sampling_substeps"], "sampling_substeps"); }
  if (j.contains("taylor")) { c.taylor = get_string(j["taylor"], "taylor"); }
  if (j.contains("T")) { c.T = get_number(j["T"], "T"); }
  if (j.contains("delta")) { c.delta = get_number(j["delta"], "delta"); }
  if (j.contains("gamma_c")) { c.gamma_c = get_number(j["gamma_c"], "gamma_c"); }
  if (j.contains("mismatch")) { c.mismatch = get_number(j["mismatch"], "mismatch"); }
  if (j.contains("x0")) { c.x0 = get_vector(j["x0"], "x0"); }
  if (j.contains("u_init")) {
    if (j["u_init"].is_null()) {
      c.u_init.reset();
    } else {
      c.u_init = get_vector(j["u_init"], "u_init");
    }
  }
  if (j.contains("steps")) { c.steps = get_int(j["steps"], "steps"); }
  if (j.contains("substeps")) { c.substeps = get_int(j["substeps"], "substeps"); }
  if (j.contains("box")) {
    const json & b = j["box"];
    require_object(b, "box", {"lower", "upper"});
    if (b.contains("lower")) { c.box_lower = get_vector(b["lower"], "box.lower"); }
    if (b.contains("upper")) { c.box_upper = get_vector(b["upper"], "box.upper"); }
  }
  if (j.contains("model_params")) { parse_model_params(j["model_params"], c.model, c.model_params); }
  if (j.contains("output")) {
    const json & o = j["output"];
    require_object(o, "output", {"dir", "name"});
    if (o.contains("dir")) { c.output_dir = get_string(o["dir"], "output.dir"); }
    if (o.contains("name")) { c.output_name = get_string(o["name"], "output.name"); }
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) { throw ConfigError("", "cannot open config '" + path.string() + "'"); }
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error & e) {
    // Translate the byte offset into line and column.
    const std::size_t pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("", path.string() + ":" + std::to_string(line) + ":" + std::to_string(col)
                              + ": syntax error");
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig & c)
{
  json j;
  j["model"] = c.model;
  j["backend"] = c.backend;
  j["sampling_substeps"] = c.sampling_substeps;
  j["taylor"] = c.taylor;
  j["T"] = c.T;
  j["delta"] = c.delta;
  j["gamma_c"] = c.gamma_c;
  j["mismatch"] = c.mismatch;
  j["x0"] = c.x0;
  j["u_init"] = c.u_init ? json(*c.u_init) : json(nullptr);
  j["steps"] = c.steps;
  j["substeps"] = c.substeps;
  j["box"] = {{"lower", c.box_lower}, {"upper", c.box_upper}};
  const ModelParams & mp = c.model_params;
  if (is_rollover(c.model)) {
    json w = json::array();
    for (const auto & p : mp.waypoints) { w.push_back({p[0], p[1]}); }
    j["model_params"] = {{"terrain_amplitude", mp.terrain_amplitude},
                         {"terrain_freq_x", mp.terrain_freq_x},
                         {"terrain_freq_y", mp.terrain_freq_y},
                         {"g_grav", mp.g_grav},
                         {"track", mp.track},
                         {"h_cg", mp.h_cg},
                         {"k_v", mp.k_v},
                         {"k_omega", mp.k_omega},
                         {"waypoints", w},
                         {"switch_radius", mp.switch_radius}};
  } else {
    j["model_params"] = {{"limit", mp.limit}, {"level", mp.level}, {"u_nom", mp.u_nom}};
  }
  j["output"] = {{"dir", c.output_dir}, {"name", c.output_name}};
  return j;
}

Experiment build_experiment(const ExperimentConfig & c)
{
  validate(c);
  Experiment e;
  const ModelParams & mp = c.model_params;
  e.params.T = c.T;
  e.params.delta = c.delta;
  e.params.gamma = ClassKappa::linear(c.gamma_c);
  e.params.mismatch = c.mismatch;
  const TaylorCurvature curvature = c.taylor == "literal" ? TaylorCurvature::literal : TaylorCurvature::half;
  e.backend = parse_backend(c.backend, c.sampling_substeps, curvature);
  e.x0 = Eigen::Map<const Vector>(c.x0.data(), static_cast<Eigen::Index>(c.x0.size()));
  e.box = InputBox(Eigen::Map<const Vector>(c.box_lower.data(), static_cast<Eigen::Index>(c.box_lower.size())),
                   Eigen::Map<const Vector>(c.box_upper.data(), static_cast<Eigen::Index>(c.box_upper.size())));
  e.setup.steps = c.steps;
  e.setup.substeps = c.substeps;
  if (c.u_init) {
    e.setup.u_init = Eigen::Map<const Vector>(c.u_init->data(), static_cast<Eigen::Index>(c.u_init->size()));
  }

  if (is_rollover(c.model)) {
    const models::Terrain terrain =
        models::default_terrain(mp.terrain_amplitude, mp.terrain_freq_x, mp.terrain_freq_y);
    e.sys = models::rollover_robot(terrain);
    e.constraints = models::rollover_constraints(terrain, {mp.g_grav, mp.track, mp.h_cg});
    e.policy = models::waypoint_tracker(mp.waypoints, mp.switch_radius, {mp.k_v, mp.k_omega});
  } else {
    e.sys = models::double_integrator();
    e.constraints.push_back(c.model == "double_integrator_h1" ? models::position_limit(mp.limit)
                                                              : models::position_band(mp.level));
    const double u_nom = mp.u_nom;
    e.policy = [u_nom](const Vector &, double) { return Vector::Constant(1, u_nom).eval(); };
  }
  return e;
}

}  // namespace zocbf::cli
