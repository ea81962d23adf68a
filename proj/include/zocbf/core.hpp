#ifndef ZOCBF_CORE_HPP_
#define ZOCBF_CORE_HPP_

/**
 * @file
 * @brief Shared domain types: control-affine systems, constraints, input boxes,
 * class-K functions and the zero-order barrier parameters.
 */

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace zocbf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A user map returned a non-finite value.
class EvaluationError : public Error
{
public:
  using Error::Error;
};

/// An integrator stage produced a non-finite state.
class DivergenceError : public Error
{
public:
  DivergenceError(std::size_t stage, const std::string & what)
      : Error(what), stage_(stage)
  {}
  std::size_t stage() const noexcept { return stage_; }

private:
  std::size_t stage_;
};

class LinearizationError : public Error
{
public:
  using Error::Error;
};

/// Overflow or non-finite input in a dense numeric kernel (e.g. expm).
class NumericError : public Error
{
public:
  using Error::Error;
};

/// Quadratic constraint with an indefinite or convex-upward Q handed to the QCQP solver.
class NonconvexityError : public Error
{
public:
  using Error::Error;
};

using ScalarMap = std::function<double(const Vector &)>;
using VectorMap = std::function<Vector(const Vector &)>;
using MatrixMap = std::function<Matrix(const Vector &)>;

using StateInputScalar = std::function<double(const Vector &, const Vector &)>;
using StateInputVector = std::function<Vector(const Vector &, const Vector &)>;
using StateInputMatrix = std::function<Matrix(const Vector &, const Vector &)>;

/**
 * @brief Control-affine system xdot = f(x) + g(x) u.
 *
 * `df_dx` is optional; when empty the Jacobian is obtained by central differences.
 * `normalize` is an optional post-step map applied by the simulator (angle wrapping).
 */
struct ControlAffineSystem
{
  int n = 0;
  int m = 0;
  VectorMap f;
  MatrixMap g;
  MatrixMap df_dx;
  VectorMap normalize;
  std::string name;

  /// f(x) + g(x) u
  Vector dynamics(const Vector & x, const Vector & u) const;
  /// Analytic Jacobian of f when provided, finite differences otherwise.
  Matrix drift_jacobian(const Vector & x) const;
};

/// Componentwise box lower <= u <= upper.
struct InputBox
{
  Vector lower;
  Vector upper;

  InputBox() = default;
  /// Throws std::invalid_argument unless lower <= upper and both are finite.
  InputBox(Vector lo, Vector hi);
  /// Symmetric scalar box replicated over `m` inputs.
  static InputBox uniform(int m, double lo, double hi);

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vector & u, double tol = 0.0) const;
  double diagonal() const { return (upper - lower).norm(); }
};

/**
 * @brief Scalar constraint h(x, u) >= 0 with optional derivatives.
 *
 * Missing derivatives fall back to finite differences. `hess` is the second-derivative
 * matrix of h with respect to the stacked vector (x, u).
 */
struct ConstraintFunction
{
  StateInputScalar h;
  StateInputVector grad_x;
  StateInputVector grad_u;
  StateInputMatrix hess;
  std::string name;

  double operator()(const Vector & x, const Vector & u) const { return h(x, u); }

  Vector gradient_x(const Vector & x, const Vector & u) const;
  Vector gradient_u(const Vector & x, const Vector & u) const;
  Matrix hessian(const Vector & x, const Vector & u) const;
};

/// Extended class-K function. Only the linear family gamma(s) = gamma_c * s exists today.
struct ClassKappa
{
  enum class Kind { linear };

  Kind kind = Kind::linear;
  double gamma_c = 1.0;

  /// Throws std::invalid_argument unless 0 < gamma_c <= 1.
  static ClassKappa linear(double gamma_c);

  double operator()(double s) const;
};

/// gamma(s); |result| <= |s|.
double gamma_eval(const ClassKappa & g, double s);

struct ZocbfParams
{
  double T = 0.1;
  double delta = 0.01;
  ClassKappa gamma{};
  /// Constant upper bound on the prediction mismatch m(T, u).
  double mismatch = 0.0;

  /// Throws std::invalid_argument on T <= 0, delta < 0, mismatch < 0 or invalid gamma.
  void validate() const;
};

// Finite differences. Per-coordinate step is 1e-6 * max(1, |coordinate|).

/// Central-difference gradient of a scalar map. Throws EvaluationError naming the coordinate
/// whose perturbation produced a non-finite value.
Vector finite_diff_grad(const ScalarMap & fn, const Vector & point);

/// Central-difference Jacobian (rows = outputs).
Matrix finite_diff_jacobian(const VectorMap & fn, const Vector & point);

/// Second-order central-difference Hessian; step 1e-4 * max(1, |coordinate|), symmetrized.
Matrix finite_diff_hessian(const ScalarMap & fn, const Vector & point);

/// Stacks (x, u) into one vector.
Vector stack(const Vector & x, const Vector & u);

}  // namespace zocbf

#endif  // ZOCBF_CORE_HPP_
