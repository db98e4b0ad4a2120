// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic scene and ground-truth trajectory generation. Kinematic
// parameters are resampled until the trajectory classifies back to its
// generating primitives even when every classifier threshold is scaled by
// +/-20%, so the generating command is an exact oracle for the labeler.
#pragma once

#include <optional>
#include <vector>

#include "hist/geometry.hpp"
#include "hist/meta_action.hpp"
#include "hist/policy.hpp"
#include "hist/rng.hpp"
#include "hist/scorer.hpp"

namespace hist {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CorridorShape { FollowPath, Straight };

struct ScenarioSpec {
  uint64_t seed = 0;
  LateralPrimitive lateral = LateralPrimitive::Straight_Strict;
  LongitudinalPrimitive longitudinal =
      LongitudinalPrimitive::Constant_Speed_Strict;
  double corridor_width = 7.0;
  int n_obstacles = 2;
  CorridorShape corridor_shape = CorridorShape::FollowPath;
  double speed_limit = 15.0;
  int k_history = 3;

  void validate(double ego_width = 2.0) const {
    if (corridor_width < ego_width + 1.0)
      throw InvalidConfigError("scenario: corridor narrower than ego + 1 m");
    if (n_obstacles < 0 || k_history < 0)
      throw InvalidConfigError("scenario: negative count");
  }
};

struct GeneratedScene {
  ScenarioSpec spec;
  Scene scene;
  Trajectory gt;
  DrivingCommand oracle;
  PromptHistory history;
  SceneInputs inputs;  // filled by render_views
};

// The fixed 3-view rig: front, front-left, front-right, 90 degree HFOV each.
inline CameraRig make_default_rig(int patch_rows = 4, int patch_cols = 4) {
  CameraRig rig;
  rig.patch_rows = patch_rows;
  rig.patch_cols = patch_cols;
  const int img = 64;
  CameraIntrinsics k;
  k.image_w = k.image_h = img;
  k.fx = k.fy = img / 2.0;  // 90 degree horizontal FOV
  k.cx = k.cy = img / 2.0;
  // Camera axes -> ego axes: z_cam = forward, x_cam = -y_ego, y_cam = -z_ego.
  Mat3 base;
  base << 0, 0, 1,
         -1, 0, 0,
          0, -1, 0;
  const double yaws[3] = {0.0, deg2rad(60.0), deg2rad(-60.0)};
  for (double yaw : yaws) {
    Mat3 rz;
    rz << std::cos(yaw), -std::sin(yaw), 0,
          std::sin(yaw), std::cos(yaw), 0,
          0, 0, 1;
    Extrinsics e;
    e.rotation = rz * base;
    e.translation = Vec3(0.5, 0.0, 1.6);
    rig.intrinsics.push_back(k);
    rig.extrinsics.push_back(e);
  }
  return rig;
}

namespace gen_detail {

// Speed profile on a fine grid over [-history_span, horizon].
struct SpeedProfile {
  double dt = 0.01;
  double t0 = -2.0;  // history span
  std::vector<double> v;  // v[i] at time t0 + i*dt

  double at(double t) const {
    double idx = (t - t0) / dt;
    int i = std::clamp(static_cast<int>(idx), 0,
                       static_cast<int>(v.size()) - 2);
    double f = std::clamp(idx - i, 0.0, 1.0);
    return v[i] * (1 - f) + v[i + 1] * f;
  }

  // Arc length from t=0 to t (t >= 0).
  double arc(double t) const {
    double s = 0.0;
    for (double tt = 0.0; tt + dt <= t + 1e-12; tt += dt)
      s += 0.5 * (at(tt) + at(tt + dt)) * dt;
    return s;
  }
};

struct LongitudinalParams {
  double v0 = 0;      // speed at t=0
  double accel = 0;   // constant acceleration for t >= 0
  double a_hist = 0;  // constant acceleration during history
  double osc_amp = 0, osc_period = 2.0;  // for the loose constant profile
};

inline LongitudinalParams sample_longitudinal(LongitudinalPrimitive p,
                                              Rng& rng) {
  LongitudinalParams q;
  switch (p) {
    case LongitudinalPrimitive::Full_Stop:
      q.v0 = rng.uniform(0.02, 0.10);
      q.a_hist = -1.5;
      break;
    case LongitudinalPrimitive::Creeping:
      q.v0 = rng.uniform(0.5, 1.1);
      q.a_hist = -0.8;
      break;
    case LongitudinalPrimitive::Emergency_Decel:
      q.v0 = rng.uniform(10.0, 12.0);
      q.accel = rng.uniform(-5.4, -5.0);
      break;
    case LongitudinalPrimitive::Controlled_Decel:
      q.v0 = rng.uniform(12.8, 14.0);
      q.accel = rng.uniform(-2.9, -2.6);
      q.a_hist = q.accel;
      break;
    case LongitudinalPrimitive::Mild_Decel:
      q.v0 = rng.uniform(7.0, 10.0);
      q.accel = rng.uniform(-1.4, -0.7);
      q.a_hist = q.accel;
      break;
    case LongitudinalPrimitive::Constant_Speed_Strict:
      q.v0 = rng.uniform(5.0, 12.0);
      break;
    case LongitudinalPrimitive::Constant_Speed_Loose:
      q.v0 = rng.uniform(6.0, 10.0);
      q.osc_amp = rng.uniform(0.6, 0.9);
      break;
    case LongitudinalPrimitive::Mild_Accel:
      q.v0 = rng.uniform(4.0, 8.0);
      q.accel = rng.uniform(0.7, 1.4);
      q.a_hist = q.accel;
      break;
    case LongitudinalPrimitive::Aggressive_Accel:
      q.v0 = rng.uniform(3.0, 6.0);
      q.accel = rng.uniform(2.6, 3.4);
      q.a_hist = 0.5;
      break;
  }
  return q;
}

inline SpeedProfile build_speed_profile(const LongitudinalParams& q,
                                        double horizon) {
  SpeedProfile sp;
  int n = static_cast<int>(std::llround((horizon - sp.t0) / sp.dt)) + 1;
  sp.v.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = sp.t0 + i * sp.dt;
    double v;
    if (t < 0) {
      // History runs the same constant acceleration backwards in time.
      v = q.v0 + q.a_hist * t;
    } else {
      v = q.v0 + q.accel * t;
      if (q.osc_amp > 0)
        v = q.v0 + q.osc_amp * std::sin(2.0 * kPi * t / q.osc_period);
    }
    sp.v[i] = std::max(0.0, v);
  }
  return sp;
}

// Lateral path parameterized by arc length; starts at the origin heading +x.
struct LateralPath {
  // 0 = straight, 1 = arc, 2 = quintic lateral shift
  int kind = 0;
  double radius = 0;     // arc (positive), sign via left flag
  bool left = true;
  double shift = 0;      // total lateral displacement for kind 2
  double start = 0;      // arc length where the shift begins (kind 2)
  double length = 1;     // shift window length (kind 2)

  Vec2 pos(double s) const {
    switch (kind) {
      case 1: {
        double a = s / radius;
        double y = radius * (1 - std::cos(a));
        return {radius * std::sin(a), left ? y : -y};
      }
      case 2: {
        double u = std::clamp((s - start) / length, 0.0, 1.0);
        double w = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
        // Slopes stay small, so arc length ~ x.
        return {s, shift * w};
      }
      default:
        return {s, 0.0};
    }
  }

  double heading_at(double s) const {
    const double h = 0.05;
    Vec2 d = pos(s + h) - pos(std::max(0.0, s - h));
    return std::atan2(d.y(), d.x());
  }
};

inline MetaActionConfig scale_thresholds(const MetaActionConfig& c, double f) {
  MetaActionConfig s = c;
  s.sharp_turn_deg *= f;
  s.slight_turn_deg *= f;
  s.lane_change_min_m *= f;
  s.lane_change_max_m *= f;
  s.straight_dlat_m *= f;
  s.straight_psi_deg *= f;
  s.full_stop_speed *= f;
  s.creeping_speed *= f;
  s.emergency_accel *= f;
  s.controlled_accel *= f;
  s.mild_decel_accel *= f;
  s.aggressive_accel *= f;
  s.mild_accel_accel *= f;
  s.strict_step_accel *= f;
  return s;
}

// Margin policy: the trajectory must classify to the target under the
// nominal thresholds and under every threshold scaled by 0.8 and by 1.2.
inline bool classifies_with_margin(const Trajectory& traj,
                                   const DrivingCommand& target,
                                   const MetaActionConfig& cfg) {
  for (double f : {1.0, 0.8, 1.2}) {
    MetaActionConfig c = scale_thresholds(cfg, f);
    if (classify_lateral(traj, c) != target.lateral) return false;
    if (classify_longitudinal(traj, c) != target.longitudinal) return false;
  }
  return true;
}

// Maneuvers that need a usable measured heading/displacement window are
// incompatible with near-stationary or hard-braking speed profiles.
inline bool combo_feasible(LateralPrimitive lat, LongitudinalPrimitive lon) {
  if (lat == LateralPrimitive::Straight_Strict) return true;
  bool slow = lon == LongitudinalPrimitive::Full_Stop ||
              lon == LongitudinalPrimitive::Creeping;
  return !slow && lon != LongitudinalPrimitive::Emergency_Decel;
}

}  // namespace gen_detail

class ScenarioGenerator {
 public:
  explicit ScenarioGenerator(MetaActionConfig meta = {}, ScorerConfig sc = {})
      : meta_(meta), scorer_(sc) {}

  GeneratedScene generate_scene(const ScenarioSpec& spec) const {
    spec.validate(scorer_.config().ego_width);
    using namespace gen_detail;
    if (!combo_feasible(spec.lateral, spec.longitudinal))
      throw GenerationError("infeasible primitive combination: " +
                            std::string(to_string(spec.lateral)) + " + " +
                            to_string(spec.longitudinal));
    bool is_turn = spec.lateral == LateralPrimitive::Sharp_Left_Turn ||
                   spec.lateral == LateralPrimitive::Sharp_Right_Turn ||
                   spec.lateral == LateralPrimitive::Slight_Left_Turn ||
                   spec.lateral == LateralPrimitive::Slight_Right_Turn;
    if (spec.corridor_shape == CorridorShape::Straight && is_turn)
      throw GenerationError("turn maneuver in a straight corridor");

    for (int attempt = 0; attempt < 256; ++attempt) {
      Rng rng = Rng(spec.seed).fork(attempt);
      LongitudinalParams lp = sample_longitudinal(spec.longitudinal, rng);
      SpeedProfile sp = build_speed_profile(lp, 4.0);
      double total_len = sp.arc(4.0);

      LateralPath path;
      if (!sample_lateral(spec.lateral, sp, total_len, spec.corridor_width,
                          rng, &path))
        continue;

      Trajectory gt;
      gt.dt = 0.5;
      gt.horizon = 4.0;
      for (int i = 1; i <= 8; ++i)
        gt.waypoints.push_back(path.pos(sp.arc(0.5 * i)));

      DrivingCommand target{spec.lateral, spec.longitudinal};
      if (!classifies_with_margin(gt, target, meta_)) continue;

      GeneratedScene out;
      out.spec = spec;
      out.gt = gt;
      out.oracle = target;
      build_scene(spec, path, total_len, rng, &out);
      build_history(spec, lp, sp, &out);
      if (!ground_truth_safe(out)) continue;
      return out;
    }
    throw GenerationError("no feasible sample after 256 attempts");
  }

  // Rasterized per-view occupancy plus analytic ray-cast depth.
  SceneInputs render_views(const Scene& scene, const CameraRig& rig) const {
    SceneInputs in;
    const double far_plane = 60.0;
    for (int v = 0; v < rig.n_views(); ++v) {
      const CameraIntrinsics& k = rig.intrinsics[v];
      const Extrinsics& e = rig.extrinsics[v];
      MatXd depth(rig.patch_rows, rig.patch_cols);
      MatXd raster(rig.patch_rows * rig.patch_cols, 4);
      for (int r = 0; r < rig.patch_rows; ++r)
        for (int c = 0; c < rig.patch_cols; ++c) {
          Vec2 px = patch_center(r, c, rig.patch_rows, rig.patch_cols, k);
          Vec3 d_cam((px.x() - k.cx) / k.fx, (px.y() - k.cy) / k.fy, 1.0);
          double n = d_cam.norm();
          Vec3 dir = e.rotation * d_cam / n;
          Vec3 o = e.translation;
          double best = far_plane * n;  // 3D distance budget
          int hit_kind = 0;             // 0 none/ground, 1 wall, 2 obstacle
          // Ground plane.
          if (dir.z() < -1e-9) {
            double t = -o.z() / dir.z();
            if (t < best) { best = t; hit_kind = 0; }
          }
          // Corridor boundary walls (0.6 m curbs).
          ray_polyline(o, dir, scene.corridor, 0.6, &best, &hit_kind, 1,
                       /*closed=*/true);
          // Obstacles as vertical prisms (1.8 m).
          for (const auto& ob : scene.obstacles)
            ray_obb(o, dir, ob, 1.8, &best, &hit_kind);
          double z_cam = best / n;
          depth(r, c) = std::min(z_cam, far_plane);
          int idx = r * rig.patch_cols + c;
          raster(idx, 0) = hit_kind == 2 ? 1.0 : 0.0;
          raster(idx, 1) = hit_kind == 1 ? 1.0 : 0.0;
          raster(idx, 2) = std::min(1.0, 5.0 / depth(r, c));
          raster(idx, 3) = scene.light == LightState::Red ? 1.0 : 0.0;
        }
      in.depth.push_back(depth);
      in.raster.push_back(raster);
    }
    return in;
  }

  const MetaActionConfig& meta() const { return meta_; }
  const Scorer& scorer() const { return scorer_; }

 private:
  // The classifier only sees headings of waypoint-to-waypoint chords, so a
  // turn's measured heading change spans segment midpoints, not the full
  // path. Compensate with the fraction actually observed under this speed
  // profile, and start lateral shifts after the first measured segment so
  // the reference heading stays axis-aligned.
  static bool sample_lateral(LateralPrimitive lat,
                             const gen_detail::SpeedProfile& sp,
                             double total_len, double corridor_width, Rng& rng,
                             gen_detail::LateralPath* path) {
    using gen_detail::LateralPath;
    std::vector<double> mids;
    int last_moving = 0;
    for (int i = 0; i < 7; ++i) {
      double s_a = sp.arc(0.5 * (i + 1));
      double s_b = sp.arc(0.5 * (i + 2));
      mids.push_back(0.5 * (s_a + s_b));
      if ((s_b - s_a) / 0.5 >= 0.1) last_moving = i;
    }
    double measured_frac = (mids[last_moving] - mids[0]) / total_len;

    LateralPath p;
    switch (lat) {
      case LateralPrimitive::Straight_Strict:
        p.kind = 0;
        break;
      case LateralPrimitive::Sharp_Left_Turn:
      case LateralPrimitive::Sharp_Right_Turn:
      case LateralPrimitive::Slight_Left_Turn:
      case LateralPrimitive::Slight_Right_Turn: {
        bool sharp = lat == LateralPrimitive::Sharp_Left_Turn ||
                     lat == LateralPrimitive::Sharp_Right_Turn;
        if (total_len < 8.0 || measured_frac < 0.3) return false;
        double target = sharp ? rng.uniform(85.0, 110.0)
                              : rng.uniform(30.0, 44.0);
        double dpsi = deg2rad(target) / measured_frac;
        if (dpsi > 2.8) return false;
        p.kind = 1;
        p.radius = total_len / dpsi;
        if (p.radius < corridor_width / 2.0 + 1.6) return false;
        p.left = lat == LateralPrimitive::Sharp_Left_Turn ||
                 lat == LateralPrimitive::Slight_Left_Turn;
        break;
      }
      case LateralPrimitive::Left_LaneChange:
      case LateralPrimitive::Right_LaneChange: {
        double begin = sp.arc(1.05);
        double window = total_len - begin;
        if (window < 12.0) return false;
        double d_max = std::min(4.0, 0.14 * window);
        if (d_max < 2.05) return false;
        double d = rng.uniform(2.0, d_max);
        p.kind = 2;
        p.shift = lat == LateralPrimitive::Left_LaneChange ? d : -d;
        p.start = begin;
        p.length = window;
        break;
      }
      case LateralPrimitive::Lane_Micro_Adjust: {
        double begin = sp.arc(1.05);
        double window = total_len - begin;
        if (window < 8.0) return false;
        double d = rng.uniform(0.5, 1.1);
        p.kind = 2;
        p.shift = rng.uniform() < 0.5 ? d : -d;
        p.start = begin;
        p.length = window;
        break;
      }
    }
    *path = p;
    return true;
  }

  void build_scene(const ScenarioSpec& spec,
                   const gen_detail::LateralPath& path, double total_len,
                   Rng& rng, GeneratedScene* out) const {
    Scene& scene = out->scene;
    scene.speed_limit = spec.speed_limit;
    const double hw = spec.corridor_width / 2.0;
    const double extent = std::max(total_len, 10.0) + 15.0;

    // Sampled path polyline from behind the ego to beyond the maneuver.
    std::vector<Vec2> center;
    std::vector<Vec2> left, right;
    for (double s = -8.0; s <= extent; s += 0.5) {
      Vec2 p = s >= 0 ? path.pos(s) : Vec2(s, 0.0);
      double h = s >= 0 ? path.heading_at(s) : 0.0;
      Vec2 nrm(-std::sin(h), std::cos(h));
      center.push_back(p);
      left.push_back(p + hw * nrm);
      right.push_back(p - hw * nrm);
    }
    scene.corridor = left;
    for (auto it = right.rbegin(); it != right.rend(); ++it)
      scene.corridor.push_back(*it);

    // For lane changes the reference lane stays the original straight lane;
    // the corridor still follows the driven path.
    if (path.kind == 2 && std::abs(path.shift) >= 1.5) {
      scene.centerline = {Vec2(-8.0, 0.0), Vec2(std::max(extent, 40.0), 0.0)};
    } else {
      scene.centerline = center;
    }

    // Traffic light.
    bool stoppy = spec.longitudinal == LongitudinalPrimitive::Full_Stop ||
                  spec.longitudinal == LongitudinalPrimitive::Emergency_Decel ||
                  spec.longitudinal == LongitudinalPrimitive::Controlled_Decel;
    if (stoppy) {
      scene.light = LightState::Red;
      double max_x = 0.0;
      for (const auto& w : out->gt.waypoints) max_x = std::max(max_x, w.x());
      scene.stop_line_x = max_x + 4.0;
    } else {
      scene.light = LightState::Green;
      scene.stop_line_x = 1e9;
    }

    // Obstacles: along the corridor edge or outside it, never blocking gt.
    for (int i = 0; i < spec.n_obstacles; ++i) {
      for (int tries = 0; tries < 12; ++tries) {
        double s_obs = rng.uniform(8.0, extent - 2.0);
        double side = rng.uniform() < 0.5 ? 1.0 : -1.0;
        bool edge = rng.uniform() < 0.6;
        double off = edge ? side * (hw - rng.uniform(0.5, 1.0))
                          : side * (hw + rng.uniform(1.0, 5.0));
        Vec2 p = path.pos(s_obs);
        double h = path.heading_at(s_obs);
        Vec2 nrm(-std::sin(h), std::cos(h));
        ObstacleBox ob;
        ob.center = p + off * nrm;
        ob.extent = Vec2(4.2, 1.8);
        ob.heading = h;
        if (!edge && rng.uniform() < 0.3)
          ob.velocity = rng.uniform(1.0, 3.0) * Vec2(std::cos(h), std::sin(h));
        scene.obstacles.push_back(ob);
        if (scorer_.nc(out->gt, scene) == 1.0 &&
            scorer_.ttc(out->gt, scene) == 1.0)
          break;
        scene.obstacles.pop_back();
      }
    }
  }

  void build_history(const ScenarioSpec& spec,
                     const gen_detail::LongitudinalParams& lp,
                     const gen_detail::SpeedProfile& sp,
                     GeneratedScene* out) const {
    // Positions for t < 0: straight along -x behind the origin.
    auto pos_at = [&](double t) {
      double s = 0.0;
      for (double tt = t; tt < -1e-9; tt += 0.01)
        s -= 0.5 * (sp.at(tt) + sp.at(tt + 0.01)) * 0.01;
      return Vec2(s, 0.0);
    };
    out->scene.ego_history.clear();
    for (double t = -2.0; t < 1e-9; t += 0.5)
      out->scene.ego_history.push_back(pos_at(t));
    out->scene.history_dt = 0.5;

    NavManeuver nav = NavManeuver::Straight;
    switch (spec.lateral) {
      case LateralPrimitive::Sharp_Left_Turn:
      case LateralPrimitive::Slight_Left_Turn:
      case LateralPrimitive::Left_LaneChange:
        nav = NavManeuver::Left;
        break;
      case LateralPrimitive::Sharp_Right_Turn:
      case LateralPrimitive::Slight_Right_Turn:
      case LateralPrimitive::Right_LaneChange:
        nav = NavManeuver::Right;
        break;
      default:
        nav = NavManeuver::Straight;
    }
    out->history.nav.clear();
    out->history.ego.clear();
    for (int i = 0; i <= spec.k_history; ++i) {
      double t = -0.5 * i;  // order: t, t-1, ..., t-k
      EgoState st;
      st.vx = sp.at(t);
      st.vy = 0.0;
      st.ax = t < -1e-9 ? lp.a_hist : (sp.at(0.05) - sp.at(0.0)) / 0.05;
      st.ay = 0.0;
      out->history.nav.push_back(nav);
      out->history.ego.push_back(st);
    }
  }

  bool ground_truth_safe(const GeneratedScene& g) const {
    return scorer_.nc(g.gt, g.scene) == 1.0 &&
           scorer_.dac(g.gt, g.scene) == 1.0;
  }

  // Ray against the vertical extrusion of a polyline (or closed polygon).
  static void ray_polyline(const Vec3& o, const Vec3& dir,
                           const std::vector<Vec2>& pts, double height,
                           double* best, int* kind, int kind_id, bool closed) {
    size_t n = pts.size();
    if (n < 2) return;
    size_t m = closed ? n : n - 1;
    Vec2 o2(o.x(), o.y());
    Vec2 d2(dir.x(), dir.y());
    if (d2.norm() < 1e-12) return;
    for (size_t i = 0; i < m; ++i) {
      const Vec2& a = pts[i];
      const Vec2& b = pts[(i + 1) % n];
      Vec2 ab = b - a;
      double denom = d2.x() * ab.y() - d2.y() * ab.x();
      if (std::abs(denom) < 1e-12) continue;
      Vec2 ao = a - o2;
      double t_ray = (ao.x() * ab.y() - ao.y() * ab.x()) / denom;
      double t_seg = (ao.x() * d2.y() - ao.y() * d2.x()) / -denom;
      if (t_ray <= 1e-9 || t_seg < 0.0 || t_seg > 1.0) continue;
      double z = o.z() + t_ray * dir.z();
      if (z < 0.0 || z > height) continue;
      if (t_ray < *best) {
        *best = t_ray;
        *kind = kind_id;
      }
    }
  }

  static void ray_obb(const Vec3& o, const Vec3& dir, const ObstacleBox& ob,
                      double height, double* best, int* kind) {
    // Slab test in the box frame (2D), then check hit height.
    Vec2 o2(o.x(), o.y());
    Vec2 d2(dir.x(), dir.y());
    double c = std::cos(ob.heading), s = std::sin(ob.heading);
    auto to_box = [&](const Vec2& p) {
      Vec2 r = p - ob.center;
      return Vec2(c * r.x() + s * r.y(), -s * r.x() + c * r.y());
    };
    Vec2 ob_o = to_box(o2);
    Vec2 ob_d(c * d2.x() + s * d2.y(), -s * d2.x() + c * d2.y());
    double tmin = 1e-9, tmax = *best;
    for (int axis = 0; axis < 2; ++axis) {
      double half = ob.extent[axis] / 2.0;
      double od = axis == 0 ? ob_o.x() : ob_o.y();
      double dd = axis == 0 ? ob_d.x() : ob_d.y();
      if (std::abs(dd) < 1e-12) {
        if (od < -half || od > half) return;
        continue;
      }
      double t1 = (-half - od) / dd, t2 = (half - od) / dd;
      if (t1 > t2) std::swap(t1, t2);
      tmin = std::max(tmin, t1);
      tmax = std::min(tmax, t2);
      if (tmin > tmax) return;
    }
    double z = o.z() + tmin * dir.z();
    if (z < 0.0 || z > height) return;
    if (tmin < *best) {
      *best = tmin;
      *kind = 2;
    }
  }

  MetaActionConfig meta_;
  Scorer scorer_;
};

}  // namespace hist
