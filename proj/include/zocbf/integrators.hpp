#ifndef ZOCBF_INTEGRATORS_HPP_
#define ZOCBF_INTEGRATORS_HPP_

#include "zocbf/core.hpp"

#include <utility>
#include <vector>

namespace zocbf {

/**
 * @brief Explicit Runge-Kutta tableau for an autonomous right-hand side.
 *
 * `coeffs[i]` holds the coefficients of stage i on the previous stages (strictly lower
 * triangular), `weights` sum to one.
 */
struct ButcherTableau
{
  int order = 4;
  std::vector<double> weights;
  std::vector<std::vector<double>> coeffs;

  std::size_t stages() const { return weights.size(); }

  static ButcherTableau euler();
  static ButcherTableau midpoint();
  static ButcherTableau rk4();
  /// Tableau for p in {1, 2, 4}; throws std::invalid_argument otherwise.
  static ButcherTableau of_order(int p);
};

/// One explicit RK step of length T with u held constant.
/// Throws DivergenceError carrying the stage index on a non-finite stage state.
Vector flow_step(const ControlAffineSystem & sys, const Vector & x, const Vector & u, double T,
                 const ButcherTableau & tab);

inline constexpr int kDefaultSubsteps = 10;

/// N successive RK4 substeps of length T / N. Ground truth for tests and the simulator.
Vector flow_reference(const ControlAffineSystem & sys, const Vector & x, const Vector & u, double T,
                      int substeps = kDefaultSubsteps);

struct IntersampleMinimum
{
  double value;
  double time;
};

/// min over t in {0, T/N, ..., T} of h(phi(t; x, u), u). The first minimum wins ties.
IntersampleMinimum min_h_intersample(const ControlAffineSystem & sys, const ConstraintFunction & h,
                                     const Vector & x, const Vector & u, double T, int grid);

}  // namespace zocbf

#endif  // ZOCBF_INTEGRATORS_HPP_
