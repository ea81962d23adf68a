#include "zocbf/simulation.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "zocbf/integrators.hpp"

namespace zocbf {

SimulationLog simulate(const ControlAffineSystem & sys, std::span<const ConstraintFunction> hs,
                       const ZocbfParams & params, const FilterBackend & backend, NominalPolicy policy,
                       const Vector & x0, const InputBox & box, const SimulationSetup & setup)
{
  params.validate();
  backend.validate();
  if (setup.steps < 1) { throw std::invalid_argument("simulate: steps must be >= 1"); }
  if (setup.substeps < 1) { throw std::invalid_argument("simulate: substeps must be >= 1"); }
  if (x0.size() != sys.n) { throw std::invalid_argument("simulate: x0 has the wrong dimension"); }

  SimulationLog log;
  log.T = params.T;
  log.substeps = setup.substeps;
  for (const auto & h : hs) { log.constraint_names.push_back(h.name); }

  const auto nc = static_cast<Eigen::Index>(hs.size());
  const ButcherTableau rk4 = ButcherTableau::rk4();
  const double dt = params.T / setup.substeps;

  Vector x = x0;
  Vector u_prev = setup.u_init ? *setup.u_init : policy(x0, 0.0);
  if (u_prev.size() != sys.m) { throw std::invalid_argument("simulate: u_init has the wrong dimension"); }
  log.states.push_back(x);

  for (int k = 0; k < setup.steps; ++k) {
    const double t = k * params.T;
    try {
      const Vector u_nom = policy(x, t);
      Vector h_now(nc);
      for (Eigen::Index i = 0; i < nc; ++i) { h_now[i] = hs[i](x, u_prev); }

      FilterContext ctx;
      ctx.warm_start = u_prev;
      ctx.workers = setup.workers;
      const FilterResult res = safety_filter_step(backend, sys, hs, params, x, u_prev, u_nom, box, ctx);
      const Vector & u = res.u;

      std::vector<Vector> fine;
      fine.reserve(setup.substeps + 1);
      Vector state = x;
      for (int j = 0; j <= setup.substeps; ++j) {
        if (j > 0) { state = flow_step(sys, state, u, dt, rk4); }
        Vector hv(nc);
        for (Eigen::Index i = 0; i < nc; ++i) { hv[i] = hs[i](state, u); }
        fine.push_back(std::move(hv));
      }
      Vector margins(nc);
      for (Eigen::Index i = 0; i < nc; ++i) { margins[i] = fine.back()[i] - required_level(params, h_now[i]); }

      log.times.push_back(t);
      log.inputs.push_back(u);
      log.nominal.push_back(u_nom);
      log.sample_h.push_back(h_now);
      log.step_margins.push_back(margins);
      log.records.push_back({res.status, res.margin, res.stats.iterations, res.stats.evaluations,
                             res.stats.wall_time});
      for (int j = 0; j <= setup.substeps; ++j) {
        log.fine_times.push_back(t + j * dt);
        log.fine_h.push_back(std::move(fine[j]));
      }
      x = sys.normalize ? sys.normalize(state) : state;
      log.states.push_back(x);
      u_prev = u;
    } catch (const Error & e) {
      throw SimulationAborted(std::string("simulation aborted at step ") + std::to_string(k) + ": " + e.what(),
                              std::move(log));
    }
  }
  return log;
}

SafetyReport safety_report(const SimulationLog & log, double tolerance, double violation_tol)
{
  SafetyReport rep;
  const auto nc = log.constraints();
  rep.steps = log.steps();
  rep.min_h.assign(nc, std::numeric_limits<double>::infinity());
  for (std::size_t p = 0; p < log.fine_h.size(); ++p) {
    for (std::size_t i = 0; i < nc; ++i) {
      const double v = log.fine_h[p][static_cast<Eigen::Index>(i)];
      rep.min_h[i] = std::min(rep.min_h[i], v);
      if (!rep.first_violation && v < -violation_tol) { rep.first_violation = log.fine_times[p]; }
    }
  }
  rep.min_h_overall = nc == 0 ? std::numeric_limits<double>::infinity()
                              : *std::min_element(rep.min_h.begin(), rep.min_h.end());
  double total_time = 0.0;
  for (std::size_t k = 0; k < log.steps(); ++k) {
    const double dev = (log.inputs[k] - log.nominal[k]).norm();
    if (dev > tolerance) { ++rep.interventions; }
    rep.max_intervention = std::max(rep.max_intervention, dev);
    total_time += log.records[k].wall_time;
    if (log.records[k].status == FilterStatus::infeasible) { ++rep.infeasible_steps; }
  }
  rep.mean_solve_time = log.steps() == 0 ? 0.0 : total_time / static_cast<double>(log.steps());
  return rep;
}

}  // namespace zocbf
