// SPDX-License-Identifier: Apache-2.0
//
// Standalone SVG overlays of planned trajectories over scene geometry.
// Fixed scale: 1 meter = 8 SVG units. Panels are stacked vertically:
// coarse plan, aligned candidates (omitted when empty), refined plan.
#pragma once

#include <string>
#include <vector>

#include "hist/csv.hpp"
#include "hist/meta_action.hpp"
#include "hist/scorer.hpp"

namespace hist {

constexpr double kSvgUnitsPerMeter = 8.0;

namespace svg_detail {

struct Frame {
  double min_x, max_y, margin;

  double sx(double wx) const { return (wx - min_x) * kSvgUnitsPerMeter + margin; }
  double sy(double wy) const { return (max_y - wy) * kSvgUnitsPerMeter + margin; }
};

inline std::string points_attr(const std::vector<Vec2>& pts, const Frame& f) {
  std::string s;
  for (const auto& p : pts) {
    if (!s.empty()) s += ' ';
    s += fmt_double(f.sx(p.x())) + "," + fmt_double(f.sy(p.y()));
  }
  return s;
}

inline std::string polyline(const std::vector<Vec2>& pts, const Frame& f,
                            const std::string& stroke, double width,
                            bool close = false) {
  std::string tag = close ? "polygon" : "polyline";
  return "<" + tag + " points=\"" + points_attr(pts, f) +
         "\" fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
         fmt_double(width) + "\"/>\n";
}

inline std::string obstacle_rect(const ObstacleBox& ob, const Frame& f) {
  Vec2 ax(std::cos(ob.heading), std::sin(ob.heading));
  Vec2 ay(-ax.y(), ax.x());
  Vec2 ex = ax * ob.extent.x() / 2, ey = ay * ob.extent.y() / 2;
  std::vector<Vec2> corners = {ob.center + ex + ey, ob.center + ex - ey,
                               ob.center - ex - ey, ob.center - ex + ey};
  return "<polygon points=\"" + points_attr(corners, f) +
         "\" fill=\"#c0392b\" fill-opacity=\"0.6\" stroke=\"#7b241c\" "
         "stroke-width=\"1\"/>\n";
}

inline std::string traj_path(const Trajectory& traj, const Frame& f,
                             const std::string& stroke, double width) {
  std::vector<Vec2> pts = {Vec2::Zero()};
  for (const auto& w : traj.waypoints) pts.push_back(w);
  std::string out = polyline(pts, f, stroke, width);
  for (const auto& w : traj.waypoints)
    out += "<circle cx=\"" + fmt_double(f.sx(w.x())) + "\" cy=\"" +
           fmt_double(f.sy(w.y())) + "\" r=\"2\" fill=\"" + stroke + "\"/>\n";
  return out;
}

inline std::string panel(const Scene& scene, const Frame& f,
                         const std::string& title, double panel_w,
                         double panel_h, double y_off,
                         const std::string& body) {
  std::string out = "<g transform=\"translate(0," + fmt_double(y_off) +
                    ")\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + fmt_double(panel_w) +
         "\" height=\"" + fmt_double(panel_h) +
         "\" fill=\"#f7f9f9\" stroke=\"#aab7b8\"/>\n";
  if (scene.corridor.size() >= 3)
    out += "<polygon points=\"" + points_attr(scene.corridor, f) +
           "\" fill=\"#d6eaf8\" stroke=\"#2e86c1\" stroke-width=\"1\"/>\n";
  if (scene.centerline.size() >= 2)
    out += polyline(scene.centerline, f, "#85929e", 1.0);
  for (const auto& ob : scene.obstacles) out += obstacle_rect(ob, f);
  // Ego footprint at the origin.
  out += "<rect x=\"" + fmt_double(f.sx(-2.25)) + "\" y=\"" +
         fmt_double(f.sy(1.0)) + "\" width=\"" +
         fmt_double(4.5 * kSvgUnitsPerMeter) + "\" height=\"" +
         fmt_double(2.0 * kSvgUnitsPerMeter) +
         "\" fill=\"#1d8348\" fill-opacity=\"0.7\"/>\n";
  out += body;
  out += "<text x=\"6\" y=\"16\" font-family=\"monospace\" font-size=\"12\" "
         "fill=\"#17202a\">" + title + "</text>\n";
  out += "</g>\n";
  return out;
}

}  // namespace svg_detail

inline std::string render_svg(const Scene& scene, const Trajectory& coarse,
                              const std::vector<Trajectory>& aligned,
                              const Trajectory& refined) {
  using namespace svg_detail;
  double min_x = -6, max_x = 6, min_y = -6, max_y = 6;
  auto grow = [&](const Vec2& p) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  };
  for (const auto& p : scene.corridor) grow(p);
  for (const auto& ob : scene.obstacles) grow(ob.center);
  for (const auto& w : coarse.waypoints) grow(w);
  for (const auto& w : refined.waypoints) grow(w);

  const double margin = 12.0;
  Frame f{min_x, max_y, margin};
  double panel_w = (max_x - min_x) * kSvgUnitsPerMeter + 2 * margin;
  double panel_h = (max_y - min_y) * kSvgUnitsPerMeter + 2 * margin;

  std::vector<std::pair<std::string, std::string>> panels;
  panels.emplace_back("coarse", traj_path(coarse, f, "#d35400", 2.0));
  if (!aligned.empty()) {
    std::string body;
    for (const auto& t : aligned) body += traj_path(t, f, "#8e44ad", 1.0);
    panels.emplace_back("aligned candidates", body);
  }
  panels.emplace_back("refined", traj_path(refined, f, "#186a3b", 2.0));

  double total_h = panel_h * static_cast<double>(panels.size());
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         fmt_double(panel_w) + "\" height=\"" + fmt_double(total_h) +
         "\" viewBox=\"0 0 " + fmt_double(panel_w) + " " +
         fmt_double(total_h) + "\">\n";
  out += "<!-- scale: 1 m = " + fmt_double(kSvgUnitsPerMeter) +
         " units -->\n";
  for (size_t i = 0; i < panels.size(); ++i)
    out += panel(scene, f, panels[i].first, panel_w, panel_h,
                 panel_h * static_cast<double>(i), panels[i].second);
  out += "</svg>\n";
  return out;
}

}  // namespace hist
