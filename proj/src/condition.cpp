#include "zocbf/condition.hpp"

#include <stdexcept>

namespace zocbf {

namespace {

double curvature_weight(TaylorCurvature c) { return c == TaylorCurvature::half ? 0.5 : 1.0; }

}  // namespace

Vector predict_state(const ControlAffineSystem & sys, const Vector & x, const Vector & u, double T,
                     const FlowChoice & flow)
{
  if (const auto * ref = std::get_if<ReferenceFlow>(&flow)) {
    return flow_reference(sys, x, u, T, ref->substeps);
  }
  return flow_step(sys, x, u, T, std::get<RungeKuttaFlow>(flow).tableau);
}

double required_level(const ZocbfParams & params, double h_now)
{
  return h_now - params.gamma(h_now) + params.delta + params.mismatch;
}

double exact_margin(const ControlAffineSystem & sys, const ConstraintFunction & h,
                    const ZocbfParams & params, const Vector & x_k, const Vector & u_prev,
                    const Vector & u, const FlowChoice & flow)
{
  const Vector next = predict_state(sys, x_k, u, params.T, flow);
  return h(next, u) - required_level(params, h(x_k, u_prev));
}

double delta_lower_bound(double hbar_x, double M, double T)
{
  if (hbar_x < 0.0 || M < 0.0 || T < 0.0) {
    throw std::invalid_argument("delta_lower_bound: arguments must be non-negative");
  }
  return hbar_x * M * T;
}

StateInputScalar taylor1_h(const ConstraintFunction & h, const Vector & x_k, const Vector & u_prev)
{
  const double h0 = h(x_k, u_prev);
  const Vector gx = h.gradient_x(x_k, u_prev);
  const Vector gu = h.gradient_u(x_k, u_prev);
  return [=](const Vector & x, const Vector & u) {
    return h0 + gx.dot(x - x_k) + gu.dot(u - u_prev);
  };
}

StateInputScalar taylor2_h(const ConstraintFunction & h, const Vector & x_k, const Vector & u_prev,
                           TaylorCurvature curvature)
{
  const auto first = taylor1_h(h, x_k, u_prev);
  const Matrix H = curvature_weight(curvature) * h.hessian(x_k, u_prev);
  const Vector z0 = stack(x_k, u_prev);
  return [=](const Vector & x, const Vector & u) {
    const Vector d = stack(x, u) - z0;
    return first(x, u) + d.dot(H * d);
  };
}

LinearConstraint linear_constraint(const ConstraintFunction & h, const DiscreteModel & dm,
                                   const AffineModel & model, const ZocbfParams & params,
                                   const Vector & x_k, const Vector & u_prev)
{
  const Vector gx = h.gradient_x(x_k, u_prev);
  const Vector gu = h.gradient_u(x_k, u_prev);
  const double h0 = h(x_k, u_prev);
  LinearConstraint lc;
  lc.a = (gx.transpose() * dm.B_D * model.B).transpose() + gu;
  lc.b = gx.dot(dm.A_D * x_k + dm.B_D * model.C - x_k) - gu.dot(u_prev) + params.gamma(h0)
       - params.delta - params.mismatch;
  return lc;
}

QuadraticConstraint quadratic_constraint(const ConstraintFunction & h, const DiscreteModel & dm,
                                         const AffineModel & model, const ZocbfParams & params,
                                         const Vector & x_k, const Vector & u_prev,
                                         TaylorCurvature curvature)
{
  const auto n = x_k.size();
  const auto m = u_prev.size();
  const LinearConstraint lin = linear_constraint(h, dm, model, params, x_k, u_prev);
  const Matrix H = h.hessian(x_k, u_prev);
  const double w = curvature_weight(curvature);

  // (x_hat - x_k, u - u_prev) = d0 + L u
  Matrix L(n + m, m);
  L.topRows(n) = dm.B_D * model.B;
  L.bottomRows(m) = Matrix::Identity(m, m);
  Vector d0(n + m);
  d0.head(n) = dm.A_D * x_k + dm.B_D * model.C - x_k;
  d0.tail(m) = -u_prev;

  const Matrix Hs = 0.5 * (H + H.transpose());
  QuadraticConstraint qc;
  const Matrix Q = w * L.transpose() * Hs * L;
  qc.Q = 0.5 * (Q + Q.transpose());
  qc.q = lin.a + 2.0 * w * L.transpose() * Hs * d0;
  qc.c = lin.b + w * d0.dot(Hs * d0);
  return qc;
}

double conventional_cbf_margin(const ControlAffineSystem & sys, const ConstraintFunction & b,
                               const ClassKappa & gamma, double T, const Vector & x,
                               const Vector & u)
{
  const Vector gx = b.gradient_x(x, u);
  return gx.dot(sys.dynamics(x, u)) + gamma(b(x, u)) / T;
}

Vector input_sensitivity(const ControlAffineSystem & sys, const ConstraintFunction & h,
                         const Vector & x_k, const Vector & u_prev, const Vector & u0,
                         const ButcherTableau & tab, double T)
{
  return finite_diff_grad(
    [&](const Vector & u) { return h(flow_step(sys, x_k, u, T, tab), u_prev); }, u0);
}

}  // namespace zocbf
