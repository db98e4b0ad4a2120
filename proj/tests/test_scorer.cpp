// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hist/rng.hpp"
#include "hist/scorer.hpp"

using namespace hist;

namespace {

// Straight corridor scene: 8 m wide, centerline along +x, no obstacles.
Scene straight_scene() {
  Scene s;
  s.corridor = {{-10, -4}, {80, -4}, {80, 4}, {-10, 4}};
  s.centerline = {{-10, 0}, {80, 0}};
  return s;
}

// Constant-speed straight trajectory along the centerline.
Trajectory cruise(double v = 8.0) {
  Trajectory t;
  for (int i = 1; i <= 8; ++i) t.waypoints.emplace_back(v * 0.5 * i, 0.0);
  return t;
}

}  // namespace

TEST_CASE("all-perfect scene scores exactly 1") {
  Scorer scorer;
  Scene s = straight_scene();
  s.speed_limit = 8.0;  // cruise covers the full progress denominator
  ScoreCard c = scorer.score(cruise(8.0), s);
  CHECK(c.nc == 1.0);
  CHECK(c.dac == 1.0);
  CHECK(c.ddc == 1.0);
  CHECK(c.tlc == 1.0);
  CHECK(c.ep == doctest::Approx(1.0));
  CHECK(c.ttc == 1.0);
  CHECK(c.lk == 1.0);
  CHECK(c.hc == 1.0);
  CHECK(c.ec == 1.0);
  CHECK(c.epdms == doctest::Approx(1.0));
}

TEST_CASE("worked weighted-mean example equals 0.84375") {
  Scorer scorer;
  ScoreCard c;  // all gates 1, soft terms 1 except ep
  c.ep = 0.5;
  // (5*0.5 + 5 + 2 + 2 + 2) / 16 = 13.5 / 16 = 0.84375
  CHECK(scorer.epdms(c) == doctest::Approx(0.84375).epsilon(1e-15));
}

TEST_CASE("collision gates the score to zero") {
  Scorer scorer;
  Scene s = straight_scene();
  ObstacleBox ob;
  ob.center = Vec2(12.0, 0.0);
  ob.extent = Vec2(4.0, 2.0);
  s.obstacles.push_back(ob);
  ScoreCard c = scorer.score(cruise(8.0), s);
  CHECK(c.nc == 0.0);
  CHECK(c.epdms == 0.0);
}

TEST_CASE("each hard gate zeroes the aggregate") {
  Scorer scorer;
  ScoreCard base;
  for (int gate = 0; gate < 4; ++gate) {
    ScoreCard c = base;
    (gate == 0 ? c.nc : gate == 1 ? c.dac : gate == 2 ? c.ddc : c.tlc) = 0.0;
    CHECK(scorer.epdms(c) == 0.0);
  }
  ScoreCard bad;
  bad.ep = 1.5;
  CHECK_THROWS_AS(scorer.epdms(bad), InvalidInputError);
}

TEST_CASE("single-metric perturbation never increases the aggregate") {
  Scorer scorer;
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    ScoreCard c;
    c.nc = rng.uniform() < 0.2 ? 0.0 : 1.0;
    c.dac = rng.uniform() < 0.2 ? 0.0 : 1.0;
    c.ddc = rng.uniform();
    c.tlc = rng.uniform() < 0.2 ? 0.0 : 1.0;
    c.ep = rng.uniform();
    c.ttc = rng.uniform() < 0.2 ? 0.0 : 1.0;
    c.lk = rng.uniform() < 0.2 ? 0.0 : 1.0;
    c.hc = rng.uniform();
    c.ec = rng.uniform();
    double before = scorer.epdms(c);
    // Lower one metric at random; the aggregate must not increase.
    double* fields[] = {&c.nc, &c.dac, &c.ddc, &c.tlc, &c.ep,
                        &c.ttc, &c.lk, &c.hc, &c.ec};
    double* f = fields[rng.uniform_int(9)];
    *f *= rng.uniform();
    CHECK(scorer.epdms(c) <= before + 1e-12);
  }
}

TEST_CASE("drivable area: leaving the corridor fails dac") {
  Scorer scorer;
  Scene s = straight_scene();
  Trajectory t = cruise(8.0);
  t.waypoints.back().y() = 5.0;  // outside the 8 m corridor
  CHECK(scorer.dac(t, s) == 0.0);
  Scene bad;
  bad.corridor = {{0, 0}, {1, 0}};
  CHECK_THROWS_AS(scorer.dac(t, bad), InvalidInputError);
}

TEST_CASE("direction compliance counts misaligned moving segments") {
  Scorer scorer;
  Scene s = straight_scene();
  // Half the motion runs against the centerline direction.
  Trajectory t;
  t.waypoints = {{4, 0}, {8, 0}, {12, 0}, {16, 0},
                 {12, 0}, {8, 0}, {4, 0}, {0, 0}};
  CHECK(scorer.ddc(t, s) == doctest::Approx(0.5));
  // A stationary plan complies by convention.
  Trajectory still;
  still.waypoints.assign(8, Vec2::Zero());
  CHECK(scorer.ddc(still, s) == 1.0);
}

TEST_CASE("red light: crossing the stop line fails tlc") {
  Scorer scorer;
  Scene s = straight_scene();
  s.light = LightState::Red;
  s.stop_line_x = 20.0;
  CHECK(scorer.tlc(cruise(8.0), s) == 0.0);   // reaches x=32
  CHECK(scorer.tlc(cruise(4.0), s) == 1.0);   // stops at x=16
  s.light = LightState::Green;
  CHECK(scorer.tlc(cruise(8.0), s) == 1.0);
}

TEST_CASE("progress is the clamped fraction of the speed-limit distance") {
  Scorer scorer;
  Scene s = straight_scene();
  s.speed_limit = 16.0;  // denominator 64 m over the 4 s horizon
  CHECK(scorer.ep(cruise(8.0), s) == doctest::Approx(0.5));
  // Backwards motion clamps at 0.
  Trajectory back;
  for (int i = 1; i <= 8; ++i) back.waypoints.emplace_back(-2.0 * i, 0.0);
  CHECK(scorer.ep(back, s) == 0.0);
}

TEST_CASE("ttc flags imminent collision that nc misses") {
  Scorer scorer;
  Scene s = straight_scene();
  ObstacleBox ob;
  ob.center = Vec2(40.0, 0.0);  // just beyond the 4 s sweep at 8 m/s
  ob.extent = Vec2(3.0, 2.0);
  s.obstacles.push_back(ob);
  Trajectory t = cruise(8.0);  // ends at x=32, coasting reaches x=40
  CHECK(scorer.nc(t, s) == 1.0);
  CHECK(scorer.ttc(t, s) == 0.0);
}

TEST_CASE("lane keeping tolerates lane changes but not drift") {
  Scorer scorer;
  Scene s = straight_scene();
  // Micro drift beyond the deviation bound fails.
  Trajectory drift = cruise(8.0);
  for (int i = 4; i < 8; ++i) drift.waypoints[i].y() = 0.9;
  CHECK(scorer.lk(drift, s) == 0.0);
  // A proper lane change (d_lat ~ 2.4) is exempt.
  Trajectory lane;
  Vec2 p(0, 0);
  for (int i = 0; i < 8; ++i) {
    p += (i == 3 || i == 4) ? Vec2(4.0, 1.2) : Vec2(4.0, 0.0);
    lane.waypoints.push_back(p);
  }
  CHECK(scorer.lk(lane, s) == 1.0);
}

TEST_CASE("comfort bounds acceleration, jerk and plan-to-plan change") {
  Scorer scorer;
  Scene s = straight_scene();
  // Hard brake: 8 m/s to 0 in one step = 16 m/s^2.
  Trajectory brake;
  brake.waypoints = {{4, 0}, {8, 0}, {8, 0}, {8, 0},
                     {8, 0}, {8, 0}, {8, 0}, {8, 0}};
  CHECK(scorer.hc(brake, s) == 0.0);
  CHECK(scorer.hc(cruise(8.0), s) == 1.0);
  // ec: history implies cruising at 8 m/s; a matching plan passes, a
  // sudden launch fails.
  s.ego_history = {{-12, 0}, {-8, 0}, {-4, 0}, {0, 0}};
  CHECK(scorer.ec(cruise(8.0), s) == 1.0);
  Trajectory launch;
  for (int i = 1; i <= 8; ++i) launch.waypoints.emplace_back(6.0 * i, 0.0);
  CHECK(scorer.ec(launch, s) == 0.0);  // 8 -> 12 m/s in one dt
  s.ego_history.clear();
  CHECK(scorer.ec(launch, s) == 1.0);  // no history, passes by convention
}

TEST_CASE("oriented box intersection agrees with known configurations") {
  using detail::Obb;
  Obb a{Vec2(0, 0), Vec2(2, 1), 0.0};
  CHECK(detail::obb_intersect(a, Obb{Vec2(3.5, 0), Vec2(2, 1), 0.0}));
  CHECK(!detail::obb_intersect(a, Obb{Vec2(4.5, 0), Vec2(2, 1), 0.0}));
  // Rotated box whose corner reaches in.
  CHECK(detail::obb_intersect(a, Obb{Vec2(2.8, 0), Vec2(2, 1), kPi / 4}));
  // Diagonal separation that axis-aligned bounds would miss.
  CHECK(!detail::obb_intersect(Obb{Vec2(0, 0), Vec2(1, 1), kPi / 4},
                               Obb{Vec2(2.2, 2.2), Vec2(1, 1), kPi / 4}));
}
