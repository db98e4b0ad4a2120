// SPDX-License-Identifier: Apache-2.0
//
// Analytic multi-criteria driving score: nine sub-metrics aggregated as
// hard safety gates times a weighted mean of soft progress/comfort terms.
// Thresholds and weights are configuration defaults for plausible urban
// driving, not values taken from any benchmark.
#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "hist/common.hpp"
#include "hist/meta_action.hpp"

namespace hist {

struct ObstacleBox {
  Vec2 center;        // ego frame at t=0
  Vec2 extent;        // full length (along heading) and width, meters
  double heading = 0; // radians
  Vec2 velocity = Vec2::Zero();  // constant over the horizon

  Vec2 center_at(double t) const { return center + velocity * t; }
};

enum class LightState { Green, Red };

struct Scene {
  std::vector<Vec2> corridor;    // simple polygon, CCW
  std::vector<Vec2> centerline;  // polyline with implied per-segment direction
  std::vector<ObstacleBox> obstacles;
  LightState light = LightState::Green;
  double stop_line_x = 1e9;
  double speed_limit = 15.0;
  // Previous-step ego positions at dt spacing, ending at the origin (t=0).
  std::vector<Vec2> ego_history;
  double history_dt = 0.5;
};

struct ScoreCard {
  double nc = 1, dac = 1, ddc = 1, tlc = 1;
  double ep = 1, ttc = 1, lk = 1, hc = 1, ec = 1;
  double epdms = 1;
};

struct ScorerConfig {
  double ego_length = 4.5;
  double ego_width = 2.0;
  double ttc_horizon = 1.0;        // seconds of constant-velocity lookahead
  double lk_max_deviation = 0.75;  // meters from centerline
  double hc_max_accel = 4.0;       // m/s^2
  double hc_max_jerk = 8.0;        // m/s^3
  double ec_max_accel_delta = 2.0; // m/s^2 plan-to-plan
  // Soft-term weights (ep, ttc, lk, hc, ec), normalized in epdms().
  std::array<double, 5> soft_weights = {5, 5, 2, 2, 2};
  MetaActionConfig meta;
};

namespace detail {

struct Obb {
  Vec2 center;
  Vec2 half;  // half extents
  double heading;
};

inline std::array<Vec2, 4> obb_corners(const Obb& b) {
  Vec2 ax(std::cos(b.heading), std::sin(b.heading));
  Vec2 ay(-ax.y(), ax.x());
  Vec2 ex = ax * b.half.x(), ey = ay * b.half.y();
  return {b.center + ex + ey, b.center + ex - ey, b.center - ex - ey,
          b.center - ex + ey};
}

// Separating-axis test for two oriented boxes in the plane.
inline bool obb_intersect(const Obb& a, const Obb& b) {
  auto ca = obb_corners(a);
  auto cb = obb_corners(b);
  std::array<Vec2, 4> axes = {
      Vec2(std::cos(a.heading), std::sin(a.heading)),
      Vec2(-std::sin(a.heading), std::cos(a.heading)),
      Vec2(std::cos(b.heading), std::sin(b.heading)),
      Vec2(-std::sin(b.heading), std::cos(b.heading))};
  for (const Vec2& ax : axes) {
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (const Vec2& c : ca) {
      double p = ax.dot(c);
      amin = std::min(amin, p);
      amax = std::max(amax, p);
    }
    for (const Vec2& c : cb) {
      double p = ax.dot(c);
      bmin = std::min(bmin, p);
      bmax = std::max(bmax, p);
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

inline bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
  bool inside = false;
  size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      double x = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

inline double point_segment_distance(const Vec2& p, const Vec2& a,
                                     const Vec2& b) {
  Vec2 ab = b - a;
  double len2 = ab.squaredNorm();
  if (len2 < 1e-18) return (p - a).norm();
  double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

// Index of the centerline segment closest to p.
inline size_t nearest_segment(const Vec2& p, const std::vector<Vec2>& line) {
  size_t best = 0;
  double best_d = 1e300;
  for (size_t i = 0; i + 1 < line.size(); ++i) {
    double d = point_segment_distance(p, line[i], line[i + 1]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// Ego positions including the implicit origin at t=0, plus per-step headings
// (stationary steps reuse the previous heading).
inline void ego_sweep(const Trajectory& traj, std::vector<Vec2>& pos,
                      std::vector<double>& heading) {
  pos.clear();
  heading.clear();
  pos.push_back(Vec2::Zero());
  for (const auto& w : traj.waypoints) pos.push_back(w);
  double prev = 0.0;
  for (size_t i = 1; i < pos.size(); ++i) {
    Vec2 d = pos[i] - pos[i - 1];
    double h = d.norm() > 1e-6 ? std::atan2(d.y(), d.x()) : prev;
    heading.push_back(h);
    prev = h;
  }
}

}  // namespace detail

class Scorer {
 public:
  explicit Scorer(ScorerConfig cfg = {}) : cfg_(cfg) {}

  const ScorerConfig& config() const { return cfg_; }

  // No at-fault collision: 0 iff the swept ego box hits any obstacle.
  double nc(const Trajectory& traj, const Scene& scene) const {
    std::vector<Vec2> pos;
    std::vector<double> hd;
    detail::ego_sweep(traj, pos, hd);
    Vec2 half(cfg_.ego_length / 2, cfg_.ego_width / 2);
    for (size_t i = 1; i < pos.size(); ++i) {
      double t = static_cast<double>(i) * traj.dt;
      detail::Obb ego{pos[i], half, hd[i - 1]};
      for (const auto& ob : scene.obstacles) {
        detail::Obb box{ob.center_at(t), ob.extent / 2, ob.heading};
        if (detail::obb_intersect(ego, box)) return 0.0;
      }
    }
    return 1.0;
  }

  // Drivable area compliance: every swept ego-box corner inside the corridor.
  double dac(const Trajectory& traj, const Scene& scene) const {
    if (scene.corridor.size() < 3)
      throw InvalidInputError("dac: corridor polygon needs >= 3 vertices");
    std::vector<Vec2> pos;
    std::vector<double> hd;
    detail::ego_sweep(traj, pos, hd);
    Vec2 half(cfg_.ego_length / 2, cfg_.ego_width / 2);
    for (size_t i = 1; i < pos.size(); ++i) {
      detail::Obb ego{pos[i], half, hd[i - 1]};
      for (const Vec2& c : detail::obb_corners(ego))
        if (!detail::point_in_polygon(c, scene.corridor)) return 0.0;
    }
    return 1.0;
  }

  // Driving direction compliance: fraction of moving segments aligned with
  // the nearest centerline direction. A fully stationary plan complies.
  double ddc(const Trajectory& traj, const Scene& scene) const {
    if (scene.centerline.size() < 2)
      throw InvalidInputError("ddc: centerline needs >= 2 points");
    std::vector<Vec2> pos;
    std::vector<double> hd;
    detail::ego_sweep(traj, pos, hd);
    int moving = 0, aligned = 0;
    for (size_t i = 1; i < pos.size(); ++i) {
      Vec2 d = pos[i] - pos[i - 1];
      if (d.norm() < 1e-6) continue;
      ++moving;
      size_t s = detail::nearest_segment(pos[i - 1], scene.centerline);
      Vec2 dir = scene.centerline[s + 1] - scene.centerline[s];
      if (d.dot(dir) > 0) ++aligned;
    }
    return moving == 0 ? 1.0
                       : static_cast<double>(aligned) /
                             static_cast<double>(moving);
  }

  // Traffic light compliance: with a red light, no waypoint may cross the
  // stop line.
  double tlc(const Trajectory& traj, const Scene& scene) const {
    if (scene.light == LightState::Green) return 1.0;
    for (const auto& w : traj.waypoints)
      if (w.x() > scene.stop_line_x) return 0.0;
    return 1.0;
  }

  // Ego progress along the centerline direction over speed_limit * horizon.
  double ep(const Trajectory& traj, const Scene& scene) const {
    if (scene.centerline.size() < 2)
      throw InvalidInputError("ep: centerline needs >= 2 points");
    std::vector<Vec2> pos;
    std::vector<double> hd;
    detail::ego_sweep(traj, pos, hd);
    double progress = 0.0;
    for (size_t i = 1; i < pos.size(); ++i) {
      size_t s = detail::nearest_segment(pos[i - 1], scene.centerline);
      Vec2 dir = (scene.centerline[s + 1] - scene.centerline[s]).normalized();
      progress += dir.dot(pos[i] - pos[i - 1]);
    }
    double denom = scene.speed_limit * traj.horizon;
    return std::clamp(denom > 0 ? progress / denom : 0.0, 0.0, 1.0);
  }

  // Time to collision: 0 iff coasting at the instantaneous velocity for
  // ttc_horizon seconds would hit an obstacle (also coasting).
  double ttc(const Trajectory& traj, const Scene& scene) const {
    std::vector<Vec2> pos;
    std::vector<double> hd;
    detail::ego_sweep(traj, pos, hd);
    Vec2 half(cfg_.ego_length / 2, cfg_.ego_width / 2);
    for (size_t i = 1; i < pos.size(); ++i) {
      double t = static_cast<double>(i) * traj.dt;
      Vec2 vel = (pos[i] - pos[i - 1]) / traj.dt;
      for (double dt_ext = 0.25; dt_ext <= cfg_.ttc_horizon + 1e-9;
           dt_ext += 0.25) {
        detail::Obb ego{pos[i] + vel * dt_ext, half, hd[i - 1]};
        for (const auto& ob : scene.obstacles) {
          detail::Obb box{ob.center_at(t + dt_ext), ob.extent / 2, ob.heading};
          if (detail::obb_intersect(ego, box)) return 0.0;
        }
      }
    }
    return 1.0;
  }

  // Lane keeping: max deviation from the centerline bounded, except for
  // trajectories the meta-action classifier labels as a lane change.
  double lk(const Trajectory& traj, const Scene& scene) const {
    LateralPrimitive lat = classify_lateral(traj, cfg_.meta);
    if (lat == LateralPrimitive::Left_LaneChange ||
        lat == LateralPrimitive::Right_LaneChange)
      return 1.0;
    for (const auto& w : traj.waypoints) {
      size_t s = detail::nearest_segment(w, scene.centerline);
      double d = detail::point_segment_distance(w, scene.centerline[s],
                                                scene.centerline[s + 1]);
      if (d > cfg_.lk_max_deviation) return 0.0;
    }
    return 1.0;
  }

  // History comfort: bounded acceleration and jerk along the plan.
  double hc(const Trajectory& traj, const Scene&) const {
    std::vector<Vec2> pos;
    std::vector<double> hd;
    detail::ego_sweep(traj, pos, hd);
    std::vector<Vec2> vel, acc;
    for (size_t i = 1; i < pos.size(); ++i)
      vel.push_back((pos[i] - pos[i - 1]) / traj.dt);
    for (size_t i = 1; i < vel.size(); ++i)
      acc.push_back((vel[i] - vel[i - 1]) / traj.dt);
    for (const auto& a : acc)
      if (a.norm() > cfg_.hc_max_accel) return 0.0;
    for (size_t i = 1; i < acc.size(); ++i)
      if (((acc[i] - acc[i - 1]) / traj.dt).norm() > cfg_.hc_max_jerk)
        return 0.0;
    return 1.0;
  }

  // Extended comfort: the plan's first acceleration stays close to the last
  // acceleration of the previous plan. Empty history passes by convention.
  double ec(const Trajectory& traj, const Scene& scene) const {
    if (scene.ego_history.size() < 3) return 1.0;
    const auto& h = scene.ego_history;
    double hdt = scene.history_dt;
    size_t n = h.size();
    Vec2 a_hist =
        ((h[n - 1] - h[n - 2]) / hdt - (h[n - 2] - h[n - 3]) / hdt) / hdt;
    // First plan acceleration: history end -> origin -> first waypoint.
    Vec2 v_prev = (Vec2::Zero() - h[n - 2]) / hdt;
    Vec2 v_next = (traj.waypoints[0] - Vec2::Zero()) / traj.dt;
    Vec2 a_plan = (v_next - v_prev) / traj.dt;
    return (a_plan - a_hist).norm() <= cfg_.ec_max_accel_delta ? 1.0 : 0.0;
  }

  // Aggregate: product of hard gates times the normalized weighted mean of
  // the soft terms.
  double epdms(const ScoreCard& c) const {
    const double vals[] = {c.nc, c.dac, c.ddc, c.tlc, c.ep,
                           c.ttc, c.lk, c.hc, c.ec};
    for (double v : vals)
      if (!(v >= 0.0 && v <= 1.0))
        throw InvalidInputError("epdms: sub-metric outside [0,1]");
    double wsum = 0, acc = 0;
    const double soft[] = {c.ep, c.ttc, c.lk, c.hc, c.ec};
    for (int i = 0; i < 5; ++i) {
      wsum += cfg_.soft_weights[i];
      acc += cfg_.soft_weights[i] * soft[i];
    }
    return c.nc * c.dac * c.ddc * c.tlc * (acc / wsum);
  }

  ScoreCard score(const Trajectory& traj, const Scene& scene) const {
    traj.validate();
    ScoreCard c;
    c.nc = nc(traj, scene);
    c.dac = dac(traj, scene);
    c.ddc = ddc(traj, scene);
    c.tlc = tlc(traj, scene);
    c.ep = ep(traj, scene);
    c.ttc = ttc(traj, scene);
    c.lk = lk(traj, scene);
    c.hc = hc(traj, scene);
    c.ec = ec(traj, scene);
    c.epdms = epdms(c);
    return c;
  }

 private:
  ScorerConfig cfg_;
};

}  // namespace hist
