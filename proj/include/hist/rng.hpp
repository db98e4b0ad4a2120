// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

#include "hist/common.hpp"

namespace hist {

// Deterministic 64-bit generator (splitmix64). Used everywhere instead of
// <random> engines so that sampled values are identical across compilers.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller (one draw per call, cached pair).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 2.0 * kPi * u2;
    cached_ = r * std::sin(th);
    have_cached_ = true;
    return r * std::cos(th);
  }

  VecXd normal_vec(int n) {
    VecXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // Derive an independent stream, e.g. one per scene index.
  Rng fork(uint64_t stream) const {
    Rng r(state_ ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL));
    r.next_u64();
    return r;
  }

 private:
  uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace hist
