#ifndef ZOCBF_CONDITION_HPP_
#define ZOCBF_CONDITION_HPP_

/**
 * @file
 * @brief The zero-order barrier condition and its approximations.
 *
 * The exact condition on an input u at sample t_k reads
 *
 *   h(phi(T; x_k, u), u) - (Id - gamma)(h(x_k, u_prev)) - delta - mismatch >= 0,
 *
 * where u_prev is the input held over the previous period. The linearized backends replace
 * phi by the zero-order-hold prediction of the affine model and h by its first or second
 * order Taylor expansion about (x_k, u_prev).
 */

#include "zocbf/core.hpp"
#include "zocbf/integrators.hpp"
#include "zocbf/linearization.hpp"

#include <variant>

namespace zocbf {

/// a . u + b >= 0
struct LinearConstraint
{
  Vector a;
  double b = 0.0;

  double operator()(const Vector & u) const { return a.dot(u) + b; }
};

/// u' Q u + q . u + c >= 0
struct QuadraticConstraint
{
  Matrix Q;
  Vector q;
  double c = 0.0;

  double operator()(const Vector & u) const { return u.dot(Q * u) + q.dot(u) + c; }
};

/// Flow used to predict x_{k+1}.
struct ReferenceFlow
{
  int substeps = kDefaultSubsteps;
};
struct RungeKuttaFlow
{
  ButcherTableau tableau = ButcherTableau::rk4();
};
using FlowChoice = std::variant<ReferenceFlow, RungeKuttaFlow>;

Vector predict_state(const ControlAffineSystem & sys, const Vector & x, const Vector & u, double T,
                     const FlowChoice & flow);

/// (Id - gamma)(h(x_k, u_prev)) + delta + mismatch: the value h must reach at t_{k+1}.
double required_level(const ZocbfParams & params, double h_now);

/// Robustified ZOCBF margin of u; u is admissible iff the result is >= 0.
double exact_margin(const ControlAffineSystem & sys, const ConstraintFunction & h,
                    const ZocbfParams & params, const Vector & x_k, const Vector & u_prev,
                    const Vector & u, const FlowChoice & flow = ReferenceFlow{});

/// Smallest delta that makes h(phi(T)) >= delta imply h >= 0 over the whole period, given
/// ||dh/dx|| <= hbar_x and ||f + g u|| <= M.
double delta_lower_bound(double hbar_x, double M, double T);

/// Weight of the second-order term in the Taylor model of h.
enum class TaylorCurvature {
  half,     ///< standard 0.5 * d' H d
  literal,  ///< d' H d, without the 1/2
};

StateInputScalar taylor1_h(const ConstraintFunction & h, const Vector & x_k, const Vector & u_prev);

StateInputScalar taylor2_h(const ConstraintFunction & h, const Vector & x_k, const Vector & u_prev,
                           TaylorCurvature curvature = TaylorCurvature::half);

/// First-order (linear in u) approximation of the condition.
LinearConstraint linear_constraint(const ConstraintFunction & h, const DiscreteModel & dm,
                                   const AffineModel & model, const ZocbfParams & params,
                                   const Vector & x_k, const Vector & u_prev);

/// Second-order approximation; Q is negative semidefinite whenever the Hessian of h is.
QuadraticConstraint quadratic_constraint(const ConstraintFunction & h, const DiscreteModel & dm,
                                         const AffineModel & model, const ZocbfParams & params,
                                         const Vector & x_k, const Vector & u_prev,
                                         TaylorCurvature curvature = TaylorCurvature::half);

/// Continuous-time CBF condition db/dx (f + g u) + gamma(b) / T for a state-only b.
double conventional_cbf_margin(const ControlAffineSystem & sys, const ConstraintFunction & b,
                               const ClassKappa & gamma, double T, const Vector & x,
                               const Vector & u);

/// d/du of h(flow_step(x_k, u, T, tab), u_prev) at u0 by central differences. Zero exactly when
/// the tableau order is below the relative degree of h.
Vector input_sensitivity(const ControlAffineSystem & sys, const ConstraintFunction & h,
                         const Vector & x_k, const Vector & u_prev, const Vector & u0,
                         const ButcherTableau & tab, double T);

}  // namespace zocbf

#endif  // ZOCBF_CONDITION_HPP_
