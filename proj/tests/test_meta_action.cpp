// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hist/meta_action.hpp"
#include "hist/rng.hpp"

using namespace hist;

namespace {

// Constant-speed trajectory: first `straight` segments along +x, remaining
// segments along direction theta. Net heading change is exactly theta.
Trajectory bent_path(double theta_deg, double speed = 8.0, int straight = 3) {
  Trajectory t;
  double step = speed * t.dt;
  Vec2 p(0, 0);
  double th = deg2rad(theta_deg);
  for (int i = 0; i < 8; ++i) {
    p += (i < straight) ? Vec2(step, 0)
                        : Vec2(step * std::cos(th), step * std::sin(th));
    t.waypoints.push_back(p);
  }
  return t;
}

// Piecewise path with a pure lateral shift: straight, diagonal, straight.
// First and last segments share heading 0, so d_lat is exactly `shift`.
Trajectory shifted_path(double shift) {
  Trajectory t;
  double step = 8.0 * 0.5;
  Vec2 p(0, 0);
  for (int i = 0; i < 8; ++i) {
    if (i == 3 || i == 4)
      p += Vec2(step, shift / 2.0);
    else
      p += Vec2(step, 0);
    t.waypoints.push_back(p);
  }
  return t;
}

// Speed profile v(t) = v0 + a*t, sampled at waypoint boundaries, along +x.
Trajectory accel_path(double v0, double a) {
  Trajectory t;
  Vec2 p(0, 0);
  for (int i = 0; i < 8; ++i) {
    double v = std::max(v0 + a * (i * t.dt), 0.0);  // segment speed
    p += Vec2(v * t.dt, 0);
    t.waypoints.push_back(p);
  }
  return t;
}

Trajectory mirrored(const Trajectory& t) {
  Trajectory m = t;
  for (auto& w : m.waypoints) w.y() = -w.y();
  return m;
}

LateralPrimitive mirror_of(LateralPrimitive p) {
  switch (p) {
    case LateralPrimitive::Sharp_Left_Turn:
      return LateralPrimitive::Sharp_Right_Turn;
    case LateralPrimitive::Sharp_Right_Turn:
      return LateralPrimitive::Sharp_Left_Turn;
    case LateralPrimitive::Slight_Left_Turn:
      return LateralPrimitive::Slight_Right_Turn;
    case LateralPrimitive::Slight_Right_Turn:
      return LateralPrimitive::Slight_Left_Turn;
    case LateralPrimitive::Left_LaneChange:
      return LateralPrimitive::Right_LaneChange;
    case LateralPrimitive::Right_LaneChange:
      return LateralPrimitive::Left_LaneChange;
    default:
      return p;
  }
}

}  // namespace

TEST_CASE("hand-derived lateral classifications") {
  CHECK(classify_lateral(bent_path(75)) == LateralPrimitive::Sharp_Left_Turn);
  CHECK(classify_lateral(bent_path(-75)) ==
        LateralPrimitive::Sharp_Right_Turn);
  CHECK(classify_lateral(bent_path(35)) == LateralPrimitive::Slight_Left_Turn);
  CHECK(classify_lateral(bent_path(-35)) ==
        LateralPrimitive::Slight_Right_Turn);
  CHECK(classify_lateral(shifted_path(2.5)) ==
        LateralPrimitive::Left_LaneChange);
  CHECK(classify_lateral(shifted_path(-2.5)) ==
        LateralPrimitive::Right_LaneChange);
  CHECK(classify_lateral(shifted_path(0.0)) ==
        LateralPrimitive::Straight_Strict);
  CHECK(classify_lateral(shifted_path(0.8)) ==
        LateralPrimitive::Lane_Micro_Adjust);
}

TEST_CASE("boundary cases fall on the configured side") {
  MetaActionConfig cfg;
  // Exactly at the sharp threshold: not > threshold, so slight.
  CHECK(classify_lateral(bent_path(cfg.sharp_turn_deg)) ==
        LateralPrimitive::Slight_Left_Turn);
  // Shift above lane_change_max_m no longer counts as a lane change.
  CHECK(classify_lateral(shifted_path(cfg.lane_change_max_m + 0.5)) ==
        LateralPrimitive::Lane_Micro_Adjust);
}

TEST_CASE("hand-derived longitudinal classifications") {
  CHECK(classify_longitudinal(accel_path(10.0, 0.0)) ==
        LongitudinalPrimitive::Constant_Speed_Strict);
  CHECK(classify_longitudinal(accel_path(6.0, 1.0)) ==
        LongitudinalPrimitive::Mild_Accel);
  CHECK(classify_longitudinal(accel_path(4.0, 2.5)) ==
        LongitudinalPrimitive::Aggressive_Accel);
  CHECK(classify_longitudinal(accel_path(10.0, -1.0)) ==
        LongitudinalPrimitive::Mild_Decel);
  CHECK(classify_longitudinal(accel_path(13.0, -2.5)) ==
        LongitudinalPrimitive::Controlled_Decel);
  CHECK(classify_longitudinal(accel_path(0.05, 0.0)) ==
        LongitudinalPrimitive::Full_Stop);
  CHECK(classify_longitudinal(accel_path(1.0, 0.0)) ==
        LongitudinalPrimitive::Creeping);
}

TEST_CASE("emergency braking keys off the minimum acceleration") {
  // One -4.5 m/s^2 step inside an otherwise gentle profile.
  Trajectory t;
  double v = 12.0;
  Vec2 p(0, 0);
  for (int i = 0; i < 8; ++i) {
    p += Vec2(v * t.dt, 0);
    t.waypoints.push_back(p);
    v += (i == 2 ? -4.5 : -0.2) * t.dt;
  }
  CHECK(classify_longitudinal(t) == LongitudinalPrimitive::Emergency_Decel);
}

TEST_CASE("oscillating speed is loose constant, not strict") {
  Trajectory t;
  Vec2 p(0, 0);
  for (int i = 0; i < 8; ++i) {
    double v = (i % 2 == 0) ? 8.0 : 9.0;  // |accel| = 2 > strict step
    p += Vec2(v * t.dt, 0);
    t.waypoints.push_back(p);
  }
  CHECK(classify_longitudinal(t) ==
        LongitudinalPrimitive::Constant_Speed_Loose);
}

TEST_CASE("kinematic profile matches hand-computed values") {
  Trajectory t = bent_path(30.0, 8.0, 3);
  KinematicProfile p = kinematic_profile(t);
  REQUIRE(p.speed.size() == 7);
  for (double v : p.speed) CHECK(v == doctest::Approx(8.0));
  for (double a : p.accel) CHECK(a == doctest::Approx(0.0));
  CHECK(p.net_heading_change == doctest::Approx(deg2rad(30.0)));
  CHECK(rad2deg(p.heading[1]) == doctest::Approx(0.0));
  CHECK(rad2deg(p.heading.back()) == doctest::Approx(30.0));
}

TEST_CASE("mirror symmetry over random smooth trajectories") {
  Rng rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    // Random constant-curvature path with a random speed profile.
    Trajectory t;
    double v = rng.uniform(0.5, 14.0);
    double a = rng.uniform(-2.5, 2.0);
    double kappa = rng.uniform(-0.08, 0.08);
    double heading = 0.0;
    Vec2 p(0, 0);
    for (int i = 0; i < 8; ++i) {
      double step = std::max(v, 0.0) * t.dt;
      p += step * Vec2(std::cos(heading), std::sin(heading));
      heading += kappa * step;
      v += a * t.dt;
      t.waypoints.push_back(p);
    }
    DrivingCommand c = classify(t);
    DrivingCommand m = classify(mirrored(t));
    CHECK(m.lateral == mirror_of(c.lateral));
    CHECK(m.longitudinal == c.longitudinal);
  }
}

TEST_CASE("string round trips and label_dataset errors") {
  for (int i = 0; i < kNumLateral; ++i) {
    auto p = static_cast<LateralPrimitive>(i);
    CHECK(lateral_from_string(to_string(p)) == p);
  }
  for (int i = 0; i < kNumLongitudinal; ++i) {
    auto p = static_cast<LongitudinalPrimitive>(i);
    CHECK(longitudinal_from_string(to_string(p)) == p);
  }
  CHECK_THROWS_AS(lateral_from_string("Drift"), InvalidInputError);
  CHECK_THROWS_AS(label_dataset({}), InvalidInputError);
  Trajectory bad;  // no waypoints
  CHECK_THROWS_AS(label_dataset({bad}), InvalidInputError);
}
