#include "zocbf/models.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace zocbf::models {

ControlAffineSystem double_integrator()
{
  ControlAffineSystem sys;
  sys.n = 2;
  sys.m = 1;
  sys.name = "double_integrator";
  sys.f = [](const Vector & x) { return Vector((Vector(2) << x[1], 0.0).finished()); };
  sys.g = [](const Vector &) { return Matrix((Matrix(2, 1) << 0.0, 1.0).finished()); };
  sys.df_dx = [](const Vector &) { return Matrix((Matrix(2, 2) << 0.0, 1.0, 0.0, 0.0).finished()); };
  return sys;
}

InputBox double_integrator_box() { return InputBox::uniform(1, -10.0, 10.0); }

ConstraintFunction position_limit(double limit)
{
  ConstraintFunction c;
  c.name = "h1";
  c.h = [limit](const Vector & x, const Vector &) { return limit - x[0]; };
  c.grad_x = [](const Vector & x, const Vector &) {
    Vector g = Vector::Zero(x.size());
    g[0] = -1.0;
    return g;
  };
  c.grad_u = [](const Vector &, const Vector & u) { return Vector(Vector::Zero(u.size())); };
  c.hess = [](const Vector & x, const Vector & u) {
    const auto k = x.size() + u.size();
    return Matrix(Matrix::Zero(k, k));
  };
  return c;
}

ConstraintFunction position_band(double level)
{
  ConstraintFunction c;
  c.name = "h2";
  c.h = [level](const Vector & x, const Vector &) { return level - x[0] * x[0]; };
  c.grad_x = [](const Vector & x, const Vector &) {
    Vector g = Vector::Zero(x.size());
    g[0] = -2.0 * x[0];
    return g;
  };
  c.grad_u = [](const Vector &, const Vector & u) { return Vector(Vector::Zero(u.size())); };
  c.hess = [](const Vector & x, const Vector & u) {
    const auto k = x.size() + u.size();
    Matrix H = Matrix::Zero(k, k);
    H(0, 0) = -2.0;
    return H;
  };
  return c;
}

Terrain flat_terrain() { return planar_ramp(0.0, 0.0); }

Terrain planar_ramp(double sx, double sy)
{
  return {[sx, sy](double x, double y) { return sx * x + sy * y; },
          [sx, sy](double, double) { return std::array<double, 2>{sx, sy}; }};
}

Terrain default_terrain(double amplitude, double freq_x, double freq_y)
{
  return {[=](double x, double y) { return amplitude * std::sin(freq_x * x) * std::sin(freq_y * y); },
          [=](double x, double y) {
            return std::array<double, 2>{amplitude * freq_x * std::cos(freq_x * x) * std::sin(freq_y * y),
                                         amplitude * freq_y * std::sin(freq_x * x) * std::cos(freq_y * y)};
          }};
}

SlopeAngles slope_angles(const Terrain & terrain, double x, double y, double theta)
{
  const auto [zx, zy] = terrain.gradient(x, y);
  if (!std::isfinite(zx) || !std::isfinite(zy)) { throw TerrainError("terrain gradient is not finite"); }
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double pitch = std::atan(zx * c + zy * s);
  const double roll = std::atan(std::cos(pitch) * (zx * s - zy * c));
  return {roll, pitch};
}

ControlAffineSystem rollover_robot(Terrain terrain)
{
  ControlAffineSystem sys;
  sys.n = 3;
  sys.m = 2;
  sys.name = "rollover_robot";
  sys.f = [](const Vector &) { return Vector(Vector::Zero(3)); };
  sys.df_dx = [](const Vector &) { return Matrix(Matrix::Zero(3, 3)); };
  sys.g = [terrain = std::move(terrain)](const Vector & x) {
    const auto [roll, pitch] = slope_angles(terrain, x[0], x[1], x[2]);
    Matrix G = Matrix::Zero(3, 2);
    G(0, 0) = std::cos(x[2]) * std::cos(pitch);
    G(1, 0) = std::sin(x[2]) * std::cos(pitch);
    G(2, 1) = std::cos(roll) / std::cos(pitch);
    return G;
  };
  sys.normalize = [](const Vector & x) {
    Vector out = x;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    out[2] = std::fmod(out[2], two_pi);
    if (out[2] < 0.0) { out[2] += two_pi; }
    if (out[2] >= two_pi) { out[2] = 0.0; }
    return out;
  };
  return sys;
}

std::pair<double, double> rollover_h_pair(const Vector & state, const Vector & u, const Terrain & terrain,
                                          const RolloverParams & params)
{
  const double roll = slope_angles(terrain, state[0], state[1], state[2]).roll;
  const double dynamic = u[0] * u[1] / (params.g_grav * std::cos(roll));
  const double static_margin = params.track / (2.0 * params.h_cg) - std::tan(roll);
  return {static_margin - dynamic, static_margin + dynamic};
}

std::vector<ConstraintFunction> rollover_constraints(Terrain terrain, RolloverParams params)
{
  ConstraintFunction plus;
  plus.name = "h_plus";
  plus.h = [terrain, params](const Vector & x, const Vector & u) {
    return rollover_h_pair(x, u, terrain, params).first;
  };
  ConstraintFunction minus;
  minus.name = "h_minus";
  minus.h = [terrain, params](const Vector & x, const Vector & u) {
    return rollover_h_pair(x, u, terrain, params).second;
  };
  return {plus, minus};
}

Vector nominal_forward_controller(const Vector & state, const std::array<double, 2> & goal,
                                  const ControllerGains & gains)
{
  const double dx = goal[0] - state[0];
  const double dy = goal[1] - state[1];
  Vector u = Vector::Zero(2);
  if (dx == 0.0 && dy == 0.0) { return u; }
  const double c = std::cos(state[2]);
  const double s = std::sin(state[2]);
  const double along = c * dx + s * dy;
  const double across = -s * dx + c * dy;
  double bearing = 0.0;
  if (across != 0.0) {
    bearing = std::atan(along / across);
  } else if (along != 0.0) {
    bearing = std::copysign(std::numbers::pi / 2.0, along);
  }
  u[0] = gains.k_v * along;
  u[1] = gains.k_omega * bearing;
  return u;
}

NominalPolicy waypoint_tracker(std::vector<std::array<double, 2>> goals, double switch_radius,
                               ControllerGains gains)
{
  if (goals.empty()) { throw std::invalid_argument("waypoint_tracker: empty goal list"); }
  std::size_t active = 0;
  return [goals = std::move(goals), switch_radius, gains, active](const Vector & x, double) mutable {
    while (active + 1 < goals.size()
           && std::hypot(goals[active][0] - x[0], goals[active][1] - x[1]) < switch_radius) {
      ++active;
    }
    return nominal_forward_controller(x, goals[active], gains);
  };
}

}  // namespace zocbf::models
