#ifndef ZOCBF_MODELS_HPP_
#define ZOCBF_MODELS_HPP_

/**
 * @file
 * @brief Bundled experiment models: a double integrator with two position constraints of
 * relative degree two, and a differential-drive robot on uneven terrain with a ZMP rollover
 * constraint.
 */

#include "zocbf/core.hpp"
#include "zocbf/simulation.hpp"

#include <array>
#include <functional>
#include <utility>
#include <vector>

namespace zocbf::models {

// ---------------------------------------------------------------------------------------------
// Double integrator: x = (p, v), pdot = v, vdot = u, u in [-10, 10].

ControlAffineSystem double_integrator();
InputBox double_integrator_box();

/// h1(x) = limit - p
ConstraintFunction position_limit(double limit = 10.0);
/// h2(x) = level - p^2
ConstraintFunction position_band(double level = 10.0);

// ---------------------------------------------------------------------------------------------
// Terrain and the differential-drive robot.

struct Terrain
{
  std::function<double(double, double)> height;
  std::function<std::array<double, 2>(double, double)> gradient;  ///< (z_x, z_y)
};

Terrain flat_terrain();
/// z = sx * x + sy * y
Terrain planar_ramp(double sx, double sy);
/// z = amplitude * sin(freq_x * x) * sin(freq_y * y)
Terrain default_terrain(double amplitude = 0.35, double freq_x = 0.8, double freq_y = 0.8);

struct SlopeAngles
{
  double roll;   ///< alpha, positive when the ground rises to the robot's right
  double pitch;  ///< beta, positive when the ground rises ahead
};

/// Throws TerrainError when the terrain gradient is not finite.
SlopeAngles slope_angles(const Terrain & terrain, double x, double y, double theta);

class TerrainError : public Error
{
public:
  using Error::Error;
};

struct RolloverParams
{
  double g_grav = 9.81;  ///< m/s^2
  double track = 0.5;    ///< b, wheel track width [m]
  double h_cg = 0.25;    ///< center-of-mass height [m]
};

struct ControllerGains
{
  double k_v = 1.2;
  double k_omega = 2.5;
};

/// State (x, y, theta), input (v, omega); zero drift, theta wrapped to [0, 2 pi).
ControlAffineSystem rollover_robot(Terrain terrain);

/// The ZMP constraint split at its absolute value:
/// h+- = -+ v omega / (g cos alpha) + b / (2 h_cg) - tan alpha.
std::pair<double, double> rollover_h_pair(const Vector & state, const Vector & u, const Terrain & terrain,
                                          const RolloverParams & params);

/// {h+, h-} as constraint functions (derivatives by finite differences).
std::vector<ConstraintFunction> rollover_constraints(Terrain terrain, RolloverParams params);

/**
 * @brief Forward-motion law v = K_v d_g, omega = K_omega atan(d_g / dbar_g).
 *
 * d_g and dbar_g are the goal offsets along and across the heading. At dbar_g = 0 the
 * arctangent takes its one-sided limit sign(d_g) pi / 2; at the goal both inputs are zero.
 */
Vector nominal_forward_controller(const Vector & state, const std::array<double, 2> & goal,
                                  const ControllerGains & gains);

/// Tracks goals in order, switching once within `switch_radius`; holds the last goal.
NominalPolicy waypoint_tracker(std::vector<std::array<double, 2>> goals, double switch_radius,
                               ControllerGains gains = {});

// ---------------------------------------------------------------------------------------------
// Experiment bundles with the default parameters used by the configs and acceptance suite.

struct DoubleIntegratorScenario
{
  ZocbfParams params{0.1, 0.01, ClassKappa{ClassKappa::Kind::linear, 1.0}, 0.0};
  Vector x0 = (Vector(2) << 0.0, 2.0).finished();
  Vector u_init = Vector::Zero(1);
  int steps = 100;
  int substeps = 10;
};

struct RolloverScenario
{
  double terrain_amplitude = 0.35;
  double terrain_freq_x = 0.8;
  double terrain_freq_y = 0.8;
  RolloverParams robot{};
  ControllerGains gains{};
  std::vector<std::array<double, 2>> waypoints{{2.0, 0.3}, {4.0, -0.3}, {6.0, 0.3}, {8.0, 0.0}};
  double switch_radius = 0.3;
  ZocbfParams params{0.1, 0.05, ClassKappa{ClassKappa::Kind::linear, 0.5}, 0.0};
  Vector x0 = Vector::Zero(3);
  InputBox box{(Vector(2) << -2.0, -4.0).finished(), (Vector(2) << 2.0, 4.0).finished()};
  int steps = 150;
  int substeps = 10;

  Terrain terrain() const { return default_terrain(terrain_amplitude, terrain_freq_x, terrain_freq_y); }
};

}  // namespace zocbf::models

#endif  // ZOCBF_MODELS_HPP_
