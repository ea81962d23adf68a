#include "zocbf/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace zocbf {

namespace {

double fd_step(double coordinate, double scale) { return scale * std::max(1.0, std::abs(coordinate)); }

void require_finite(double value, Eigen::Index coordinate)
{
  if (!std::isfinite(value)) {
    std::ostringstream os;
    os << "non-finite map value while differentiating along coordinate " << coordinate;
    throw EvaluationError(os.str());
  }
}

}  // namespace

Vector ControlAffineSystem::dynamics(const Vector & x, const Vector & u) const
{
  return f(x) + g(x) * u;
}

Matrix ControlAffineSystem::drift_jacobian(const Vector & x) const
{
  if (df_dx) { return df_dx(x); }
  return finite_diff_jacobian(f, x);
}

InputBox::InputBox(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi))
{
  if (lower.size() != upper.size()) { throw std::invalid_argument("InputBox: bound sizes differ"); }
  if (!lower.allFinite() || !upper.allFinite()) {
    throw std::invalid_argument("InputBox: bounds must be finite");
  }
  if ((lower.array() > upper.array()).any()) {
    throw std::invalid_argument("InputBox: lower bound exceeds upper bound");
  }
}

InputBox InputBox::uniform(int m, double lo, double hi)
{
  return InputBox(Vector::Constant(m, lo), Vector::Constant(m, hi));
}

bool InputBox::contains(const Vector & u, double tol) const
{
  return u.size() == lower.size() && (u.array() >= lower.array() - tol).all()
      && (u.array() <= upper.array() + tol).all();
}

Vector ConstraintFunction::gradient_x(const Vector & x, const Vector & u) const
{
  if (grad_x) { return grad_x(x, u); }
  return finite_diff_grad([&](const Vector & xx) { return h(xx, u); }, x);
}

Vector ConstraintFunction::gradient_u(const Vector & x, const Vector & u) const
{
  if (grad_u) { return grad_u(x, u); }
  return finite_diff_grad([&](const Vector & uu) { return h(x, uu); }, u);
}

Matrix ConstraintFunction::hessian(const Vector & x, const Vector & u) const
{
  if (hess) { return hess(x, u); }
  const auto n = x.size();
  const auto m = u.size();
  return finite_diff_hessian(
    [&](const Vector & z) { return h(z.head(n), z.tail(m)); }, stack(x, u));
}

ClassKappa ClassKappa::linear(double gamma_c)
{
  if (!(gamma_c > 0.0 && gamma_c <= 1.0)) {
    throw std::invalid_argument("ClassKappa: gamma_c must lie in (0, 1]");
  }
  return ClassKappa{Kind::linear, gamma_c};
}

double ClassKappa::operator()(double s) const { return gamma_c * s; }

double gamma_eval(const ClassKappa & g, double s) { return g(s); }

void ZocbfParams::validate() const
{
  if (!(T > 0.0) || !std::isfinite(T)) { throw std::invalid_argument("ZocbfParams: T must be > 0"); }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw std::invalid_argument("ZocbfParams: delta must be >= 0");
  }
  if (!(mismatch >= 0.0) || !std::isfinite(mismatch)) {
    throw std::invalid_argument("ZocbfParams: mismatch must be >= 0");
  }
  ClassKappa::linear(gamma.gamma_c);
}

Vector finite_diff_grad(const ScalarMap & fn, const Vector & point)
{
  Vector grad(point.size());
  Vector probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double step = fd_step(point[i], 1e-6);
    probe[i] = point[i] + step;
    const double fp = fn(probe);
    require_finite(fp, i);
    probe[i] = point[i] - step;
    const double fm = fn(probe);
    require_finite(fm, i);
    probe[i] = point[i];
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

Matrix finite_diff_jacobian(const VectorMap & fn, const Vector & point)
{
  Vector probe = point;
  Matrix jac;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double step = fd_step(point[i], 1e-6);
    probe[i] = point[i] + step;
    const Vector fp = fn(probe);
    probe[i] = point[i] - step;
    const Vector fm = fn(probe);
    probe[i] = point[i];
    if (!fp.allFinite() || !fm.allFinite()) { require_finite(std::nan(""), i); }
    if (i == 0) { jac.resize(fp.size(), point.size()); }
    jac.col(i) = (fp - fm) / (2.0 * step);
  }
  return jac;
}

Matrix finite_diff_hessian(const ScalarMap & fn, const Vector & point)
{
  const auto k = point.size();
  Matrix hess(k, k);
  Vector probe = point;
  const double f0 = fn(point);
  require_finite(f0, 0);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double hi = fd_step(point[i], 1e-4);
    probe[i] = point[i] + hi;
    const double fp = fn(probe);
    probe[i] = point[i] - hi;
    const double fm = fn(probe);
    probe[i] = point[i];
    require_finite(fp, i);
    require_finite(fm, i);
    hess(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = fd_step(point[j], 1e-4);
      auto eval = [&](double si, double sj) {
        probe[i] = point[i] + si * hi;
        probe[j] = point[j] + sj * hj;
        const double v = fn(probe);
        probe[i] = point[i];
        probe[j] = point[j];
        require_finite(v, i);
        return v;
      };
      const double mixed = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * hi * hj);
      hess(i, j) = mixed;
      hess(j, i) = mixed;
    }
  }
  return hess;
}

Vector stack(const Vector & x, const Vector & u)
{
  Vector z(x.size() + u.size());
  z << x, u;
  return z;
}

}  // namespace zocbf
