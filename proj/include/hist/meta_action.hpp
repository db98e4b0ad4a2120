// SPDX-License-Identifier: Apache-2.0
//
// Granular driving-command taxonomy: rule-based classification of a 4 s
// trajectory into one lateral and one longitudinal primitive. All numeric
// thresholds are configuration defaults, not ground truth from any dataset.
#pragma once

#include <string>
#include <vector>

#include "hist/common.hpp"

namespace hist {

struct Trajectory {
  std::vector<Vec2> waypoints;  // ego frame at t=0, spaced dt apart
  double dt = 0.5;
  double horizon = 4.0;

  int size() const { return static_cast<int>(waypoints.size()); }

  void validate() const {
    if (dt <= 0 || horizon <= 0)
      throw InvalidInputError("trajectory: dt and horizon must be positive");
    int expected = static_cast<int>(std::llround(horizon / dt));
    if (size() != expected)
      throw InvalidInputError("trajectory: expected " +
                              std::to_string(expected) + " waypoints, got " +
                              std::to_string(size()));
    for (const auto& w : waypoints)
      if (!w.allFinite())
        throw InvalidInputError("trajectory: non-finite waypoint");
  }
};

enum class LateralPrimitive {
  Sharp_Left_Turn,
  Slight_Left_Turn,
  Left_LaneChange,
  Sharp_Right_Turn,
  Slight_Right_Turn,
  Right_LaneChange,
  Straight_Strict,
  Lane_Micro_Adjust,
};
constexpr int kNumLateral = 8;

enum class LongitudinalPrimitive {
  Full_Stop,
  Creeping,
  Emergency_Decel,
  Mild_Decel,
  Controlled_Decel,
  Constant_Speed_Loose,
  Constant_Speed_Strict,
  Mild_Accel,
  Aggressive_Accel,
};
constexpr int kNumLongitudinal = 9;

struct DrivingCommand {
  LateralPrimitive lateral = LateralPrimitive::Straight_Strict;
  LongitudinalPrimitive longitudinal =
      LongitudinalPrimitive::Constant_Speed_Strict;

  bool operator==(const DrivingCommand&) const = default;
};

inline const char* to_string(LateralPrimitive p) {
  switch (p) {
    case LateralPrimitive::Sharp_Left_Turn: return "Sharp_Left_Turn";
    case LateralPrimitive::Slight_Left_Turn: return "Slight_Left_Turn";
    case LateralPrimitive::Left_LaneChange: return "Left_LaneChange";
    case LateralPrimitive::Sharp_Right_Turn: return "Sharp_Right_Turn";
    case LateralPrimitive::Slight_Right_Turn: return "Slight_Right_Turn";
    case LateralPrimitive::Right_LaneChange: return "Right_LaneChange";
    case LateralPrimitive::Straight_Strict: return "Straight_Strict";
    case LateralPrimitive::Lane_Micro_Adjust: return "Lane_Micro_Adjust";
  }
  return "?";
}

inline const char* to_string(LongitudinalPrimitive p) {
  switch (p) {
    case LongitudinalPrimitive::Full_Stop: return "Full_Stop";
    case LongitudinalPrimitive::Creeping: return "Creeping";
    case LongitudinalPrimitive::Emergency_Decel: return "Emergency_Decel";
    case LongitudinalPrimitive::Mild_Decel: return "Mild_Decel";
    case LongitudinalPrimitive::Controlled_Decel: return "Controlled_Decel";
    case LongitudinalPrimitive::Constant_Speed_Loose:
      return "Constant_Speed_Loose";
    case LongitudinalPrimitive::Constant_Speed_Strict:
      return "Constant_Speed_Strict";
    case LongitudinalPrimitive::Mild_Accel: return "Mild_Accel";
    case LongitudinalPrimitive::Aggressive_Accel: return "Aggressive_Accel";
  }
  return "?";
}

inline LateralPrimitive lateral_from_string(const std::string& s) {
  for (int i = 0; i < kNumLateral; ++i)
    if (s == to_string(static_cast<LateralPrimitive>(i)))
      return static_cast<LateralPrimitive>(i);
  throw InvalidInputError("unknown lateral primitive: " + s);
}

inline LongitudinalPrimitive longitudinal_from_string(const std::string& s) {
  for (int i = 0; i < kNumLongitudinal; ++i)
    if (s == to_string(static_cast<LongitudinalPrimitive>(i)))
      return static_cast<LongitudinalPrimitive>(i);
  throw InvalidInputError("unknown longitudinal primitive: " + s);
}

struct MetaActionConfig {
  // Lateral thresholds.
  double sharp_turn_deg = 60.0;
  double slight_turn_deg = 20.0;
  double lane_change_min_m = 1.5;
  double lane_change_max_m = 5.0;
  double straight_dlat_m = 0.3;
  double straight_psi_deg = 5.0;
  // Longitudinal thresholds (m/s and m/s^2).
  double full_stop_speed = 0.2;
  double creeping_speed = 1.5;
  double emergency_accel = -4.0;
  double controlled_accel = -2.0;
  double mild_decel_accel = -0.5;
  double aggressive_accel = 2.0;
  double mild_accel_accel = 0.5;
  double strict_step_accel = 0.3;
  // Below this speed, curvature and heading are carried over (degenerate
  // segments give no direction information).
  double low_speed_floor = 0.1;
};

struct KinematicProfile {
  std::vector<double> speed;      // per segment, size n-1
  std::vector<double> accel;      // per speed difference, size n-2
  std::vector<double> heading;    // per segment, size n-1
  std::vector<double> curvature;  // per interior waypoint, size n-2
  double lateral_displacement = 0.0;
  double net_heading_change = 0.0;  // last segment heading - first, wrapped
};

inline KinematicProfile kinematic_profile(const Trajectory& traj,
                                          const MetaActionConfig& cfg = {}) {
  traj.validate();
  const int n = traj.size();
  if (n < 3)
    throw InvalidInputError("kinematic_profile: need at least 3 waypoints");
  KinematicProfile p;
  double prev_heading = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    Vec2 d = traj.waypoints[i + 1] - traj.waypoints[i];
    double v = d.norm() / traj.dt;
    p.speed.push_back(v);
    double h = (v < cfg.low_speed_floor) ? prev_heading
                                         : std::atan2(d.y(), d.x());
    p.heading.push_back(h);
    prev_heading = h;
  }
  for (size_t i = 0; i + 1 < p.speed.size(); ++i)
    p.accel.push_back((p.speed[i + 1] - p.speed[i]) / traj.dt);
  for (size_t i = 0; i + 1 < p.heading.size(); ++i) {
    double arc = 0.5 * (p.speed[i] + p.speed[i + 1]) * traj.dt;
    double v_here = std::min(p.speed[i], p.speed[i + 1]);
    p.curvature.push_back(
        v_here < cfg.low_speed_floor || arc <= 0.0
            ? 0.0
            : wrap_angle(p.heading[i + 1] - p.heading[i]) / arc);
  }
  p.net_heading_change = wrap_angle(p.heading.back() - p.heading.front());
  // Signed perpendicular offset of the final point from the line through the
  // first waypoint along the initial heading (positive = left).
  Vec2 rel = traj.waypoints.back() - traj.waypoints.front();
  double h0 = p.heading.front();
  p.lateral_displacement =
      -std::sin(h0) * rel.x() + std::cos(h0) * rel.y();
  return p;
}

inline LateralPrimitive classify_lateral(const Trajectory& traj,
                                         const MetaActionConfig& cfg = {}) {
  KinematicProfile p = kinematic_profile(traj, cfg);
  double psi = rad2deg(p.net_heading_change);
  double dlat = p.lateral_displacement;
  if (std::abs(psi) > cfg.sharp_turn_deg)
    return psi > 0 ? LateralPrimitive::Sharp_Left_Turn
                   : LateralPrimitive::Sharp_Right_Turn;
  if (std::abs(psi) > cfg.slight_turn_deg)
    return psi > 0 ? LateralPrimitive::Slight_Left_Turn
                   : LateralPrimitive::Slight_Right_Turn;
  if (std::abs(dlat) > cfg.lane_change_min_m &&
      std::abs(dlat) <= cfg.lane_change_max_m)
    return dlat > 0 ? LateralPrimitive::Left_LaneChange
                    : LateralPrimitive::Right_LaneChange;
  if (std::abs(dlat) <= cfg.straight_dlat_m &&
      std::abs(psi) <= cfg.straight_psi_deg)
    return LateralPrimitive::Straight_Strict;
  return LateralPrimitive::Lane_Micro_Adjust;
}

inline LongitudinalPrimitive classify_longitudinal(
    const Trajectory& traj, const MetaActionConfig& cfg = {}) {
  KinematicProfile p = kinematic_profile(traj, cfg);
  double v_mean = 0.0;
  for (double v : p.speed) v_mean += v;
  v_mean /= static_cast<double>(p.speed.size());
  double a_mean = 0.0, a_min = 0.0, a_absmax = 0.0;
  for (double a : p.accel) {
    a_mean += a;
    a_min = std::min(a_min, a);
    a_absmax = std::max(a_absmax, std::abs(a));
  }
  a_mean /= static_cast<double>(p.accel.size());
  // Stop-class rules first: the final state dominates intent.
  if (v_mean < cfg.full_stop_speed) return LongitudinalPrimitive::Full_Stop;
  if (v_mean < cfg.creeping_speed) return LongitudinalPrimitive::Creeping;
  if (a_min < cfg.emergency_accel)
    return LongitudinalPrimitive::Emergency_Decel;
  if (a_mean < cfg.controlled_accel)
    return LongitudinalPrimitive::Controlled_Decel;
  if (a_mean < cfg.mild_decel_accel) return LongitudinalPrimitive::Mild_Decel;
  if (a_mean > cfg.aggressive_accel)
    return LongitudinalPrimitive::Aggressive_Accel;
  if (a_mean > cfg.mild_accel_accel) return LongitudinalPrimitive::Mild_Accel;
  if (a_absmax <= cfg.strict_step_accel)
    return LongitudinalPrimitive::Constant_Speed_Strict;
  return LongitudinalPrimitive::Constant_Speed_Loose;
}

inline DrivingCommand classify(const Trajectory& traj,
                               const MetaActionConfig& cfg = {}) {
  return {classify_lateral(traj, cfg), classify_longitudinal(traj, cfg)};
}

inline std::vector<DrivingCommand> label_dataset(
    const std::vector<Trajectory>& trajs, const MetaActionConfig& cfg = {}) {
  if (trajs.empty())
    throw InvalidInputError("label_dataset: empty trajectory list");
  std::vector<DrivingCommand> out;
  out.reserve(trajs.size());
  for (size_t i = 0; i < trajs.size(); ++i) {
    try {
      out.push_back(classify(trajs[i], cfg));
    } catch (const std::exception& e) {
      throw InvalidInputError("label_dataset: trajectory " +
                              std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace hist
