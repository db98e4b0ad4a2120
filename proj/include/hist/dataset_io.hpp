// SPDX-License-Identifier: Apache-2.0
//
// On-disk scene directory layout, one directory per scene:
//   scene.txt  - geometry and prompt history, plain text, sectioned
//   gt.csv     - ground-truth trajectory (traj_id, t, x, y)
//   label.csv  - oracle command (traj_id, lateral, longitudinal)
//   grids.bin  - per-view raster + depth grids, flat binary with a header
//                recording shapes and dtype (f64)
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hist/csv.hpp"
#include "hist/scenario.hpp"

namespace hist {

constexpr char kGridMagic[8] = {'H', 'I', 'S', 'T', 'G', 'R', 'D', '1'};

inline std::string scene_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05d", index);
  return buf;
}

inline void write_trajectories_csv(const std::string& path,
                                   const std::vector<Trajectory>& trajs) {
  CsvWriter w(path);
  w.row({"traj_id", "t", "x", "y"});
  for (size_t id = 0; id < trajs.size(); ++id)
    for (int i = 0; i < trajs[id].size(); ++i)
      w.row({std::to_string(id),
             fmt_double(trajs[id].dt * static_cast<double>(i + 1)),
             fmt_double(trajs[id].waypoints[i].x()),
             fmt_double(trajs[id].waypoints[i].y())});
}

inline std::vector<Trajectory> read_trajectories_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"traj_id", "t", "x", "y"})
    throw IoError("trajectory csv: expected header traj_id,t,x,y in " + path);
  std::vector<Trajectory> trajs;
  for (const auto& row : t.rows) {
    if (row.size() != 4)
      throw IoError("trajectory csv: malformed row in " + path);
    size_t id = std::stoul(row[0]);
    if (id >= trajs.size()) trajs.resize(id + 1);
    trajs[id].waypoints.emplace_back(std::stod(row[2]), std::stod(row[3]));
  }
  for (size_t i = 0; i < trajs.size(); ++i) {
    trajs[i].dt = 0.5;
    trajs[i].horizon = 0.5 * static_cast<double>(trajs[i].waypoints.size());
    trajs[i].validate();
  }
  return trajs;
}

namespace io_detail {

inline void write_vec2_section(std::ostream& out, const std::string& name,
                               const std::vector<Vec2>& pts) {
  out << "[" << name << "]\n";
  for (const auto& p : pts)
    out << fmt_double(p.x()) << " " << fmt_double(p.y()) << "\n";
}

inline std::vector<double> split_doubles(const std::string& line) {
  std::istringstream ss(line);
  std::vector<double> vals;
  double v;
  while (ss >> v) vals.push_back(v);
  return vals;
}

}  // namespace io_detail

inline void write_scene_txt(const std::string& path, const Scene& scene,
                            const PromptHistory& history, uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write scene file: " + path);
  out << "[meta]\n";
  out << "seed = " << seed << "\n";
  out << "light = " << (scene.light == LightState::Red ? "red" : "green")
      << "\n";
  out << "stop_line_x = " << fmt_double(scene.stop_line_x) << "\n";
  out << "speed_limit = " << fmt_double(scene.speed_limit) << "\n";
  out << "history_dt = " << fmt_double(scene.history_dt) << "\n";
  io_detail::write_vec2_section(out, "corridor", scene.corridor);
  io_detail::write_vec2_section(out, "centerline", scene.centerline);
  out << "[obstacles]\n";
  for (const auto& ob : scene.obstacles)
    out << fmt_double(ob.center.x()) << " " << fmt_double(ob.center.y())
        << " " << fmt_double(ob.extent.x()) << " " << fmt_double(ob.extent.y())
        << " " << fmt_double(ob.heading) << " " << fmt_double(ob.velocity.x())
        << " " << fmt_double(ob.velocity.y()) << "\n";
  io_detail::write_vec2_section(out, "ego_history", scene.ego_history);
  out << "[prompt]\n";
  for (size_t i = 0; i < history.nav.size(); ++i) {
    const char* nav = history.nav[i] == NavManeuver::Left ? "left"
                      : history.nav[i] == NavManeuver::Right ? "right"
                                                             : "straight";
    const EgoState& e = history.ego[i];
    out << nav << " " << fmt_double(e.vx) << " " << fmt_double(e.vy) << " "
        << fmt_double(e.ax) << " " << fmt_double(e.ay) << "\n";
  }
  if (!out) throw IoError("short write on scene file: " + path);
}

inline void read_scene_txt(const std::string& path, Scene* scene,
                           PromptHistory* history, uint64_t* seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read scene file: " + path);
  *scene = Scene{};
  *history = PromptHistory{};
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      section = line.substr(1, line.find(']') - 1);
      continue;
    }
    auto fail = [&](const std::string& why) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + why);
    };
    if (section == "meta") {
      auto eq = line.find('=');
      if (eq == std::string::npos) fail("expected key = value");
      std::string key = line.substr(0, line.find(' '));
      std::string val = line.substr(eq + 1);
      val.erase(0, val.find_first_not_of(' '));
      if (key == "seed") *seed = std::stoull(val);
      else if (key == "light")
        scene->light = val == "red" ? LightState::Red : LightState::Green;
      else if (key == "stop_line_x") scene->stop_line_x = std::stod(val);
      else if (key == "speed_limit") scene->speed_limit = std::stod(val);
      else if (key == "history_dt") scene->history_dt = std::stod(val);
      else fail("unknown meta key: " + key);
    } else if (section == "corridor" || section == "centerline" ||
               section == "ego_history") {
      auto vals = io_detail::split_doubles(line);
      if (vals.size() != 2) fail("expected 2 numbers");
      Vec2 p(vals[0], vals[1]);
      if (section == "corridor") scene->corridor.push_back(p);
      else if (section == "centerline") scene->centerline.push_back(p);
      else scene->ego_history.push_back(p);
    } else if (section == "obstacles") {
      auto vals = io_detail::split_doubles(line);
      if (vals.size() != 7) fail("expected 7 numbers");
      ObstacleBox ob;
      ob.center = Vec2(vals[0], vals[1]);
      ob.extent = Vec2(vals[2], vals[3]);
      ob.heading = vals[4];
      ob.velocity = Vec2(vals[5], vals[6]);
      scene->obstacles.push_back(ob);
    } else if (section == "prompt") {
      std::istringstream ss(line);
      std::string nav;
      EgoState e;
      if (!(ss >> nav >> e.vx >> e.vy >> e.ax >> e.ay))
        fail("expected nav + 4 numbers");
      NavManeuver m = nav == "left" ? NavManeuver::Left
                      : nav == "right" ? NavManeuver::Right
                      : nav == "straight"
                          ? NavManeuver::Straight
                          : throw IoError(path + ": unknown nav: " + nav);
      history->nav.push_back(m);
      history->ego.push_back(e);
    } else {
      fail("unknown section: " + section);
    }
  }
}

inline void write_grids(const std::string& path, const SceneInputs& in) {
  if (in.raster.empty() || in.raster.size() != in.depth.size())
    throw IoError("write_grids: raster/depth view counts differ");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write grids: " + path);
  out.write(kGridMagic, 8);
  auto u32 = [&](uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
  u32(static_cast<uint32_t>(in.raster.size()));
  u32(static_cast<uint32_t>(in.raster[0].rows()));
  u32(static_cast<uint32_t>(in.raster[0].cols()));
  u32(static_cast<uint32_t>(in.depth[0].rows()));
  u32(static_cast<uint32_t>(in.depth[0].cols()));
  u32(0);  // dtype code 0 = little-endian float64
  auto blob = [&](const MatXd& m) {
    for (int i = 0; i < m.rows(); ++i)
      out.write(reinterpret_cast<const char*>(
                    Eigen::RowVectorXd(m.row(i)).data()),
                static_cast<std::streamsize>(sizeof(double) * m.cols()));
  };
  for (const auto& m : in.raster) blob(m);
  for (const auto& m : in.depth) blob(m);
  if (!out) throw IoError("short write on grids: " + path);
}

inline SceneInputs read_grids(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read grids: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kGridMagic, 8) != 0)
    throw IoError("bad grid magic: " + path);
  uint32_t vals[6];
  in.read(reinterpret_cast<char*>(vals), sizeof(vals));
  auto [n_views, rr, rc, dr, dc, dtype] =
      std::tuple{vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]};
  if (dtype != 0) throw IoError("unsupported grid dtype in " + path);
  SceneInputs si;
  auto blob = [&](uint32_t rows, uint32_t cols) {
    MatXd m(rows, cols);
    std::vector<double> buf(static_cast<size_t>(rows) * cols);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(sizeof(double) * buf.size()));
    for (uint32_t i = 0; i < rows; ++i)
      for (uint32_t j = 0; j < cols; ++j) m(i, j) = buf[i * cols + j];
    return m;
  };
  for (uint32_t v = 0; v < n_views; ++v) si.raster.push_back(blob(rr, rc));
  for (uint32_t v = 0; v < n_views; ++v) si.depth.push_back(blob(dr, dc));
  if (!in) throw IoError("truncated grids: " + path);
  return si;
}

inline void save_scene_dir(const std::string& dir, const GeneratedScene& g) {
  std::filesystem::create_directories(dir);
  write_scene_txt(dir + "/scene.txt", g.scene, g.history, g.spec.seed);
  write_trajectories_csv(dir + "/gt.csv", {g.gt});
  CsvWriter lw(dir + "/label.csv");
  lw.row({"traj_id", "lateral", "longitudinal"});
  lw.row({"0", to_string(g.oracle.lateral), to_string(g.oracle.longitudinal)});
  write_grids(dir + "/grids.bin", g.inputs);
}

inline GeneratedScene load_scene_dir(const std::string& dir) {
  GeneratedScene g;
  read_scene_txt(dir + "/scene.txt", &g.scene, &g.history, &g.spec.seed);
  auto trajs = read_trajectories_csv(dir + "/gt.csv");
  if (trajs.size() != 1)
    throw IoError("scene dir gt.csv must hold exactly one trajectory: " + dir);
  g.gt = trajs[0];
  CsvTable lbl = read_csv(dir + "/label.csv");
  if (lbl.rows.size() != 1 || lbl.rows[0].size() != 3)
    throw IoError("scene dir label.csv must hold one labeled row: " + dir);
  g.oracle.lateral = lateral_from_string(lbl.rows[0][1]);
  g.oracle.longitudinal = longitudinal_from_string(lbl.rows[0][2]);
  g.inputs = read_grids(dir + "/grids.bin");
  return g;
}

// Sorted list of scene directories under a corpus root.
inline std::vector<std::string> list_scene_dirs(const std::string& root) {
  if (!std::filesystem::is_directory(root))
    throw IoError("missing input: scene directory not found: " + root);
  std::vector<std::string> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory() &&
        e.path().filename().string().rfind("scene_", 0) == 0)
      dirs.push_back(e.path().string());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace hist
