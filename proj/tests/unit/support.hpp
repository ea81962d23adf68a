#ifndef ZOCBF_TESTS_SUPPORT_HPP_
#define ZOCBF_TESTS_SUPPORT_HPP_

#include <random>

#include "zocbf/core.hpp"

namespace zocbf::testing {

/// Seeded generator for property tests.
class Gen
{
public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  Vector vector(Eigen::Index n, double lo, double hi)
  {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) { v[i] = uniform(lo, hi); }
    return v;
  }

  Matrix matrix(Eigen::Index r, Eigen::Index c, double lo, double hi)
  {
    Matrix M(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) { M(i, j) = uniform(lo, hi); }
    }
    return M;
  }

private:
  std::mt19937_64 rng_;
};

inline Vector vec(std::initializer_list<double> values)
{
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) { v[i++] = x; }
  return v;
}

}  // namespace zocbf::testing

#endif  // ZOCBF_TESTS_SUPPORT_HPP_
