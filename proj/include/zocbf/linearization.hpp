#ifndef ZOCBF_LINEARIZATION_HPP_
#define ZOCBF_LINEARIZATION_HPP_

#include "zocbf/core.hpp"

namespace zocbf {

/// xi_dot = A xi + B u + C, the affine model of the dynamics about a (not necessarily
/// equilibrium) state x_k.
struct AffineModel
{
  Matrix A;
  Matrix B;
  Vector C;
};

/// Exact zero-order-hold discretization of an AffineModel over one period:
/// A_D = e^{AT}, B_D = int_0^T e^{A(T - tau)} dtau. Note B_D multiplies (B u + C).
struct DiscreteModel
{
  Matrix A_D;
  Matrix B_D;
};

/// A from sys.df_dx when present (finite differences otherwise), B = g(x_k), C = f(x_k) - A x_k.
AffineModel affine_model(const ControlAffineSystem & sys, const Vector & x_k);

/**
 * @brief Matrix exponential.
 *
 * Scaling and squaring with the degree-13 diagonal Pade approximant; the scaling makes
 * ||M / 2^s||_1 <= 5.37. Throws NumericError for non-finite input or overflow.
 */
Matrix expm(const Matrix & M);

/// A_D and B_D read off the exponential of the augmented block [[A, I], [0, 0]] * T.
DiscreteModel discretize(const AffineModel & model, double T);

/// x_hat = A_D x_k + B_D B u + B_D C
Vector predict_state_linear(const DiscreteModel & dm, const AffineModel & model, const Vector & x_k,
                            const Vector & u);

}  // namespace zocbf

#endif  // ZOCBF_LINEARIZATION_HPP_
