#include "zocbf/linearization.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace zocbf {

AffineModel affine_model(const ControlAffineSystem & sys, const Vector & x_k)
{
  if (!x_k.allFinite()) { throw LinearizationError("affine_model: non-finite expansion state"); }
  Matrix A;
  try {
    A = sys.drift_jacobian(x_k);
  } catch (const EvaluationError & e) {
    throw LinearizationError(std::string("affine_model: ") + e.what());
  }
  if (!A.allFinite()) { throw LinearizationError("affine_model: non-finite Jacobian entries"); }
  AffineModel model;
  model.B = sys.g(x_k);
  model.C = sys.f(x_k) - A * x_k;
  model.A = std::move(A);
  return model;
}

Matrix expm(const Matrix & M)
{
  if (M.rows() != M.cols()) { throw std::invalid_argument("expm: matrix must be square"); }
  if (!M.allFinite()) { throw NumericError("expm: non-finite entries"); }
  const auto k = M.rows();
  if (k == 0) { return M; }

  static constexpr std::array<double, 14> raw = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};
  // Scaled so that V = I + O(A^2); exp(0) then comes out exactly.
  std::array<double, 14> b{};
  for (std::size_t i = 0; i < b.size(); ++i) { b[i] = raw[i] / raw[0]; }
  static constexpr double theta13 = 5.371920351148152;

  const double norm1 = M.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm1 > theta13) { s = static_cast<int>(std::ceil(std::log2(norm1 / theta13))); }
  const Matrix A = M / std::ldexp(1.0, s);

  const Matrix I = Matrix::Identity(k, k);
  const Matrix A2 = A * A;
  const Matrix A4 = A2 * A2;
  const Matrix A6 = A4 * A2;

  const Matrix U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4
                        + b[3] * A2 + b[1] * I);
  const Matrix V =
    A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;

  Matrix R = (V - U).partialPivLu().solve(V + U);
  for (int i = 0; i < s; ++i) { R = R * R; }
  if (!R.allFinite()) { throw NumericError("expm: overflow"); }
  return R;
}

DiscreteModel discretize(const AffineModel & model, double T)
{
  if (!(T > 0.0)) { throw std::invalid_argument("discretize: T must be > 0"); }
  const auto n = model.A.rows();
  Matrix aug = Matrix::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = model.A * T;
  aug.topRightCorner(n, n) = Matrix::Identity(n, n) * T;
  const Matrix E = expm(aug);
  return {E.topLeftCorner(n, n), E.topRightCorner(n, n)};
}

Vector predict_state_linear(const DiscreteModel & dm, const AffineModel & model, const Vector & x_k,
                            const Vector & u)
{
  if (x_k.size() != dm.A_D.cols() || u.size() != model.B.cols()) {
    throw std::invalid_argument("predict_state_linear: shape mismatch");
  }
  return dm.A_D * x_k + dm.B_D * (model.B * u + model.C);
}

}  // namespace zocbf
