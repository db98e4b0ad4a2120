// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hist {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecXd = Eigen::VectorXd;
using MatXd = Eigen::MatrixXd;

// Thrown when an input value violates an operation precondition.
struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when a configuration value is inconsistent or out of range.
struct InvalidConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown on file-format or serialization problems.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace hist
