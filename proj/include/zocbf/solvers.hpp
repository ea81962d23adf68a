#ifndef ZOCBF_SOLVERS_HPP_
#define ZOCBF_SOLVERS_HPP_

/**
 * @file
 * @brief Minimum-deviation input selection subject to the zero-order barrier condition.
 *
 * Every solver minimizes ||u - u_nom|| over an input box intersected with a list of
 * constraints (all of which must be >= 0) and never throws on infeasibility: the status is
 * reported and the least-violating input is returned instead.
 */

#include "zocbf/condition.hpp"
#include "zocbf/core.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace zocbf {

enum class FilterStatus { optimal, feasible_suboptimal, infeasible };

std::string to_string(FilterStatus status);

struct SolverStats
{
  int iterations = 0;
  long evaluations = 0;
  double wall_time = 0.0;  ///< seconds
};

struct FilterResult
{
  Vector u;
  double margin = 0.0;     ///< worst constraint margin at u, as seen by the solver
  double objective = 0.0;  ///< ||u - u_nom||
  FilterStatus status = FilterStatus::infeasible;
  SolverStats stats;
};

struct FilterBackend
{
  enum class Kind { no_filter, linearized_linear, linearized_quadratic, rk_nonlinear, sampling };

  Kind kind = Kind::linearized_linear;
  int order = 4;               ///< RK order for rk_nonlinear
  int samples = 401;           ///< grid points per input dimension for sampling
  int sampling_substeps = 1;   ///< RK4 substeps per period used by the sampling backend
  TaylorCurvature curvature = TaylorCurvature::half;

  static FilterBackend no_filter() { return {Kind::no_filter}; }
  static FilterBackend linearized_linear() { return {Kind::linearized_linear}; }
  static FilterBackend linearized_quadratic(TaylorCurvature c = TaylorCurvature::half)
  {
    FilterBackend b{Kind::linearized_quadratic};
    b.curvature = c;
    return b;
  }
  static FilterBackend rk_nonlinear(int p = 4)
  {
    FilterBackend b{Kind::rk_nonlinear};
    b.order = p;
    return b;
  }
  static FilterBackend sampling(int S = 401)
  {
    FilterBackend b{Kind::sampling};
    b.samples = S;
    return b;
  }

  /// Throws std::invalid_argument unless order in {1, 2, 4} and samples >= 3.
  void validate() const;
  /// "linearized_linear", "rk_nonlinear(p=4)", "sampling(S=401)", ...
  std::string label() const;
};

/// Vector of constraint margins evaluated together (they usually share one flow prediction).
struct MarginSet
{
  std::size_t count = 0;
  std::function<Vector(const Vector &)> eval;

  static MarginSet from_list(std::vector<ScalarMap> fns);
};

Vector project_box(const Vector & u, const InputBox & box);

/**
 * @brief min ||u - u_nom||^2 s.t. a_i . u + b_i >= 0, u in box.
 *
 * Projected nominal first; otherwise coordinate-wise dual ascent with bisection on each
 * multiplier and a closed-form box projection inside. Optimal means KKT residual <= 1e-8.
 */
FilterResult solve_qp_halfspace_box(const Vector & u_nom, std::span<const LinearConstraint> constraints,
                                    const InputBox & box);

/**
 * @brief Same objective over concave quadratic constraints (plus optional halfspaces).
 *
 * The inner Lagrangian minimization is a strictly convex box QP solved by projected Newton.
 * A feasible projected nominal is returned as is; otherwise every Q must be negative
 * semidefinite within 1e-8 or NonconvexityError is thrown (use rk_nonlinear instead).
 */
FilterResult solve_qcqp_box(const Vector & u_nom, std::span<const QuadraticConstraint> quad,
                            std::span<const LinearConstraint> lin, const InputBox & box);

struct SqpOptions
{
  int max_iterations = 50;
  double feasibility_tol = 1e-6;
  double initial_radius_fraction = 0.1;  ///< of the box diagonal
  std::optional<Vector> warm_start;      ///< restart point when the first run fails
};

/// Sequential linearization with an infinity-norm trust region and an l1 merit function.
FilterResult solve_sqp_box(const Vector & u_nom, const MarginSet & margins, const InputBox & box,
                           const SqpOptions & opts = {});

/**
 * @brief Deterministic grid search: S points per dimension (box corners included) plus the
 * projected nominal. Ties break towards the lexicographically smallest input, so the result
 * does not depend on the evaluation order. `workers` <= 0 reads ZOCBF_WORKERS, then falls back
 * to the hardware concurrency.
 */
FilterResult solve_sampling(const Vector & u_nom, const MarginSet & margins, const InputBox & box,
                            int samples, int workers = 0);

/// Worker count from ZOCBF_WORKERS (>= 1), else std::thread::hardware_concurrency().
int default_worker_count();

/// Exact-condition margins of all constraints for one (x_k, u_prev), sharing the flow.
MarginSet make_margin_set(const ControlAffineSystem & sys, std::span<const ConstraintFunction> hs,
                          const ZocbfParams & params, const Vector & x_k, const Vector & u_prev,
                          const FlowChoice & flow);

struct FilterContext
{
  std::optional<Vector> warm_start;
  int workers = 0;
};

/// One safety-filter solve with the selected backend.
FilterResult safety_filter_step(const FilterBackend & backend, const ControlAffineSystem & sys,
                                std::span<const ConstraintFunction> hs, const ZocbfParams & params,
                                const Vector & x_k, const Vector & u_prev, const Vector & u_nom,
                                const InputBox & box, const FilterContext & ctx = {});

}  // namespace zocbf

#endif  // ZOCBF_SOLVERS_HPP_
