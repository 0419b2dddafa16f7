#pragma once

#include "semiflex/rotgroup.hpp"
#include "semiflex/tensor.hpp"

#include <cmath>
#include <numbers>

namespace testing {

using namespace semiflex;

constexpr double kPi = std::numbers::pi;

inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

inline Rotation random_rotation(int d, RngStream& rng) { return sample(RotationLaw::haar(d), rng); }

inline Matrix random_matrix(int rows, int cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline Vector random_unit(int d, RngStream& rng) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.normal();
  return v.normalized();
}

inline SuperOp random_superop(int d, RngStream& rng) { return SuperOp(d, random_matrix(d * d, d * d, rng)); }

}  // namespace testing
