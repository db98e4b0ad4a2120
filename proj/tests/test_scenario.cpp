// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hist/rng.hpp"
#include "hist/scenario.hpp"

using namespace hist;

namespace {

// All lateral/longitudinal pairs the generator accepts.
std::vector<std::pair<LateralPrimitive, LongitudinalPrimitive>> feasible() {
  std::vector<std::pair<LateralPrimitive, LongitudinalPrimitive>> out;
  for (int a = 0; a < kNumLateral; ++a)
    for (int b = 0; b < kNumLongitudinal; ++b) {
      auto lat = static_cast<LateralPrimitive>(a);
      auto lon = static_cast<LongitudinalPrimitive>(b);
      if (gen_detail::combo_feasible(lat, lon)) out.emplace_back(lat, lon);
    }
  return out;
}

ScenarioSpec spec_for(LateralPrimitive lat, LongitudinalPrimitive lon,
                      uint64_t seed) {
  ScenarioSpec s;
  s.seed = seed;
  s.lateral = lat;
  s.longitudinal = lon;
  return s;
}

}  // namespace

TEST_CASE("generated trajectories classify back to their primitives") {
  ScenarioGenerator gen;
  auto combos = feasible();
  Rng rng(50);
  int count = 0;
  while (count < 100) {
    auto [lat, lon] = combos[count % combos.size()];
    GeneratedScene g = gen.generate_scene(spec_for(lat, lon, rng.next_u64()));
    DrivingCommand c = classify(g.gt);
    CHECK(c.lateral == lat);
    CHECK(c.longitudinal == lon);
    CHECK(c.lateral == g.oracle.lateral);
    CHECK(c.longitudinal == g.oracle.longitudinal);
    ++count;
  }
}

TEST_CASE("oracle labels survive 20 percent threshold perturbation") {
  ScenarioGenerator gen;
  Rng rng(51);
  auto combos = feasible();
  for (int i = 0; i < 30; ++i) {
    auto [lat, lon] = combos[i % combos.size()];
    GeneratedScene g = gen.generate_scene(spec_for(lat, lon, rng.next_u64()));
    for (double f : {0.8, 1.2}) {
      MetaActionConfig c = gen_detail::scale_thresholds(gen.meta(), f);
      CHECK(classify_lateral(g.gt, c) == lat);
      CHECK(classify_longitudinal(g.gt, c) == lon);
    }
  }
}

TEST_CASE("ground truth is always collision-free and inside the corridor") {
  ScenarioGenerator gen;
  const Scorer& scorer = gen.scorer();
  Rng rng(52);
  auto combos = feasible();
  for (int i = 0; i < 40; ++i) {
    auto [lat, lon] = combos[i % combos.size()];
    ScenarioSpec sp = spec_for(lat, lon, rng.next_u64());
    sp.n_obstacles = 3;
    GeneratedScene g = gen.generate_scene(sp);
    CHECK(scorer.nc(g.gt, g.scene) == 1.0);
    CHECK(scorer.dac(g.gt, g.scene) == 1.0);
    // Corridor is a usable simple polygon, centerline a usable polyline.
    CHECK(g.scene.corridor.size() >= 3);
    CHECK(g.scene.centerline.size() >= 2);
    CHECK(g.gt.size() == 8);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  ScenarioGenerator gen;
  ScenarioSpec sp = spec_for(LateralPrimitive::Left_LaneChange,
                             LongitudinalPrimitive::Mild_Accel, 97);
  GeneratedScene a = gen.generate_scene(sp);
  GeneratedScene b = gen.generate_scene(sp);
  REQUIRE(a.gt.size() == b.gt.size());
  for (int i = 0; i < a.gt.size(); ++i)
    CHECK((a.gt.waypoints[i] - b.gt.waypoints[i]).norm() == 0.0);
  REQUIRE(a.scene.obstacles.size() == b.scene.obstacles.size());
  for (size_t i = 0; i < a.scene.obstacles.size(); ++i)
    CHECK((a.scene.obstacles[i].center - b.scene.obstacles[i].center).norm() ==
          0.0);
  // A different seed moves the trajectory.
  sp.seed = 98;
  GeneratedScene c = gen.generate_scene(sp);
  double diff = 0.0;
  for (int i = 0; i < 8; ++i)
    diff += (a.gt.waypoints[i] - c.gt.waypoints[i]).norm();
  CHECK(diff > 1e-6);
}

TEST_CASE("infeasible requests are rejected up front") {
  ScenarioGenerator gen;
  CHECK_THROWS_AS(gen.generate_scene(spec_for(
                      LateralPrimitive::Sharp_Left_Turn,
                      LongitudinalPrimitive::Full_Stop, 1)),
                  GenerationError);
  ScenarioSpec sp = spec_for(LateralPrimitive::Slight_Right_Turn,
                             LongitudinalPrimitive::Constant_Speed_Strict, 1);
  sp.corridor_shape = CorridorShape::Straight;
  CHECK_THROWS_AS(gen.generate_scene(sp), GenerationError);
  sp.corridor_shape = CorridorShape::FollowPath;
  sp.corridor_width = 2.0;  // narrower than ego + 1 m
  CHECK_THROWS_AS(gen.generate_scene(sp), InvalidConfigError);
}

TEST_CASE("red lights accompany stopping maneuvers and sit beyond the plan") {
  ScenarioGenerator gen;
  GeneratedScene stop = gen.generate_scene(spec_for(
      LateralPrimitive::Straight_Strict,
      LongitudinalPrimitive::Controlled_Decel, 7));
  CHECK(stop.scene.light == LightState::Red);
  double max_x = 0.0;
  for (const auto& w : stop.gt.waypoints) max_x = std::max(max_x, w.x());
  CHECK(stop.scene.stop_line_x > max_x);
  GeneratedScene go = gen.generate_scene(spec_for(
      LateralPrimitive::Straight_Strict,
      LongitudinalPrimitive::Constant_Speed_Strict, 7));
  CHECK(go.scene.light == LightState::Green);
}

TEST_CASE("history ends at the origin and matches the speed profile") {
  ScenarioGenerator gen;
  GeneratedScene g = gen.generate_scene(spec_for(
      LateralPrimitive::Straight_Strict,
      LongitudinalPrimitive::Constant_Speed_Strict, 11));
  REQUIRE(!g.scene.ego_history.empty());
  CHECK(g.scene.ego_history.back().norm() == 0.0);
  // Constant speed: history spacing equals the first plan step length.
  size_t n = g.scene.ego_history.size();
  double hist_step =
      (g.scene.ego_history[n - 1] - g.scene.ego_history[n - 2]).norm();
  double plan_step = g.gt.waypoints[0].norm();
  CHECK(hist_step == doctest::Approx(plan_step).epsilon(0.05));
  // Prompt history: k+1 entries, most recent first, nav consistent.
  REQUIRE(static_cast<int>(g.history.ego.size()) == g.spec.k_history + 1);
  CHECK(g.history.nav[0] == NavManeuver::Straight);
  CHECK(g.history.ego[0].vx == doctest::Approx(plan_step / g.gt.dt).epsilon(0.05));
}

TEST_CASE("rendered views have rig-shaped outputs with sane depth") {
  ScenarioGenerator gen;
  CameraRig rig = make_default_rig();
  GeneratedScene g = gen.generate_scene(spec_for(
      LateralPrimitive::Straight_Strict,
      LongitudinalPrimitive::Constant_Speed_Strict, 13));
  SceneInputs in = gen.render_views(g.scene, rig);
  REQUIRE(static_cast<int>(in.depth.size()) == rig.n_views());
  REQUIRE(static_cast<int>(in.raster.size()) == rig.n_views());
  for (int v = 0; v < rig.n_views(); ++v) {
    CHECK(in.depth[v].rows() == rig.patch_rows);
    CHECK(in.depth[v].cols() == rig.patch_cols);
    CHECK(in.raster[v].rows() == rig.patch_rows * rig.patch_cols);
    CHECK(in.raster[v].cols() == 4);
    CHECK(in.depth[v].minCoeff() > 0.0);
    CHECK(in.depth[v].maxCoeff() <= 60.0 + 1e-9);
    // Channel values are normalized.
    CHECK(in.raster[v].minCoeff() >= 0.0);
    CHECK(in.raster[v].maxCoeff() <= 1.0);
  }
  // Determinism: rendering is a pure function of the scene.
  SceneInputs in2 = gen.render_views(g.scene, rig);
  for (int v = 0; v < rig.n_views(); ++v)
    CHECK((in.depth[v] - in2.depth[v]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("default rig geometry is orthonormal and forward-facing") {
  CameraRig rig = make_default_rig();
  REQUIRE(rig.n_views() == 3);
  for (int v = 0; v < 3; ++v) {
    const Mat3& r = rig.extrinsics[v].rotation;
    CHECK((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
  // View 0 looks along +x in the ego frame: camera z axis maps to ego x.
  Vec3 fwd = rig.extrinsics[0].rotation * Vec3(0, 0, 1);
  CHECK(fwd.x() == doctest::Approx(1.0));
  CHECK(std::abs(fwd.y()) < 1e-12);
}
