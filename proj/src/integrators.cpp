#include "zocbf/integrators.hpp"

#include <sstream>
#include <stdexcept>

namespace zocbf {

ButcherTableau ButcherTableau::euler() { return {1, {1.0}, {{}}}; }

ButcherTableau ButcherTableau::midpoint() { return {2, {0.0, 1.0}, {{}, {0.5}}}; }

ButcherTableau ButcherTableau::rk4()
{
  return {4, {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0}, {{}, {0.5}, {0.0, 0.5}, {0.0, 0.0, 1.0}}};
}

ButcherTableau ButcherTableau::of_order(int p)
{
  switch (p) {
    case 1: return euler();
    case 2: return midpoint();
    case 4: return rk4();
    default: throw std::invalid_argument("ButcherTableau: supported orders are 1, 2 and 4");
  }
}

Vector flow_step(const ControlAffineSystem & sys, const Vector & x, const Vector & u, double T,
                 const ButcherTableau & tab)
{
  const std::size_t s = tab.stages();
  std::vector<Vector> k(s);
  Vector stage_state;
  for (std::size_t i = 0; i < s; ++i) {
    stage_state = x;
    for (std::size_t j = 0; j < i; ++j) {
      const double a = tab.coeffs[i][j];
      if (a != 0.0) { stage_state.noalias() += (T * a) * k[j]; }
    }
    k[i] = sys.dynamics(stage_state, u);
    if (!stage_state.allFinite() || !k[i].allFinite()) {
      std::ostringstream os;
      os << "integrator diverged at stage " << i;
      throw DivergenceError(i, os.str());
    }
  }
  Vector next = x;
  for (std::size_t i = 0; i < s; ++i) {
    if (tab.weights[i] != 0.0) { next.noalias() += (T * tab.weights[i]) * k[i]; }
  }
  if (!next.allFinite()) { throw DivergenceError(s, "integrator produced a non-finite state"); }
  return next;
}

Vector flow_reference(const ControlAffineSystem & sys, const Vector & x, const Vector & u, double T,
                      int substeps)
{
  if (substeps < 1) { throw std::invalid_argument("flow_reference: substeps must be >= 1"); }
  static const ButcherTableau tab = ButcherTableau::rk4();
  const double dt = T / substeps;
  Vector state = x;
  for (int i = 0; i < substeps; ++i) { state = flow_step(sys, state, u, dt, tab); }
  return state;
}

IntersampleMinimum min_h_intersample(const ControlAffineSystem & sys, const ConstraintFunction & h,
                                     const Vector & x, const Vector & u, double T, int grid)
{
  if (grid < 2) { throw std::invalid_argument("min_h_intersample: grid must be >= 2"); }
  const double dt = T / grid;
  Vector state = x;
  IntersampleMinimum best{h(state, u), 0.0};
  for (int j = 1; j <= grid; ++j) {
    state = flow_reference(sys, state, u, dt, 1);
    const double value = h(state, u);
    if (value < best.value) { best = {value, j * dt}; }
  }
  return best;
}

}  // namespace zocbf
