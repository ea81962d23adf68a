#ifndef ZOCBF_SIMULATION_HPP_
#define ZOCBF_SIMULATION_HPP_

#include "zocbf/core.hpp"
#include "zocbf/solvers.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace zocbf {

/// u_nom = policy(state, time). Policies are copied into each simulation, so a stateful
/// policy (e.g. a waypoint tracker) starts every run from its initial state.
using NominalPolicy = std::function<Vector(const Vector &, double)>;

struct StepRecord
{
  FilterStatus status = FilterStatus::optimal;
  double solver_margin = 0.0;
  int iterations = 0;
  long evaluations = 0;
  double wall_time = 0.0;
};

/**
 * @brief Closed-loop trajectory.
 *
 * For K steps: `times`, `inputs`, `nominal`, `step_margins`, `sample_h` and `records` have K
 * entries; `states` has K + 1 (the last is the state after the final step). The fine grid
 * holds `substeps + 1` points per step (both ends of [t_k, t_{k+1}], h evaluated with u_k).
 */
struct SimulationLog
{
  double T = 0.0;
  int substeps = 0;
  std::vector<std::string> constraint_names;

  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> inputs;
  std::vector<Vector> nominal;
  std::vector<Vector> step_margins;  ///< exact condition margin of u_k per constraint
  std::vector<Vector> sample_h;      ///< h(x_k, u_{k-1}) per constraint
  std::vector<StepRecord> records;

  std::vector<double> fine_times;
  std::vector<Vector> fine_h;        ///< per fine-grid point, one entry per constraint

  std::size_t steps() const { return times.size(); }
  std::size_t constraints() const { return constraint_names.size(); }
};

/// Raised when a step fails (integrator divergence, non-finite model output); carries
/// everything logged so far.
class SimulationAborted : public Error
{
public:
  SimulationAborted(const std::string & what, SimulationLog partial)
      : Error(what), log_(std::move(partial))
  {}
  const SimulationLog & partial_log() const { return log_; }

private:
  SimulationLog log_;
};

struct SimulationSetup
{
  int steps = 100;
  int substeps = kDefaultSubsteps;
  /// Input held before t = 0. Defaults to policy(x0, 0).
  std::optional<Vector> u_init;
  int workers = 0;
};

SimulationLog simulate(const ControlAffineSystem & sys, std::span<const ConstraintFunction> hs,
                       const ZocbfParams & params, const FilterBackend & backend, NominalPolicy policy,
                       const Vector & x0, const InputBox & box, const SimulationSetup & setup);

struct SafetyReport
{
  std::vector<double> min_h;  ///< per constraint, over the fine grid
  double min_h_overall = 0.0;
  std::optional<double> first_violation;
  int interventions = 0;
  double max_intervention = 0.0;
  double mean_solve_time = 0.0;
  int infeasible_steps = 0;
  std::size_t steps = 0;
};

/// Interventions count steps with ||u - u_nom|| > tolerance; a violation is h < -violation_tol.
SafetyReport safety_report(const SimulationLog & log, double tolerance = 1e-9, double violation_tol = 1e-9);

}  // namespace zocbf

#endif  // ZOCBF_SIMULATION_HPP_
