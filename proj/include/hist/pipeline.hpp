// SPDX-License-Identifier: Apache-2.0
//
// End-to-end wiring: corpus generation, policy/planner training, refinement,
// evaluation and the sparsifier benchmark. Each command writes its artifacts
// plus a manifest under a single output directory; everything is a pure
// function of (config, seed).
#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hist/dataset_io.hpp"
#include "hist/log.hpp"
#include "hist/manifest.hpp"
#include "hist/planner.hpp"
#include "hist/policy.hpp"
#include "hist/scenario.hpp"
#include "hist/svg.hpp"

namespace hist {

struct RunConfig {
  uint64_t seed = 1;
  int n_train = 200;
  int n_eval = 100;
  double corridor_width = 7.0;
  int max_obstacles = 3;
  double speed_limit = 15.0;
  PolicyConfig policy;
  PolicyTrainConfig policy_train;
  RefineConfig refine;
  PlannerTrainConfig planner_train;
  ScorerConfig scorer;

  static RunConfig from_config(const ConfigFile& c) {
    RunConfig rc;
    rc.seed = static_cast<uint64_t>(c.get_int("run.seed", 1));
    rc.n_train = static_cast<int>(c.get_int("corpus.n_train", 200));
    rc.n_eval = static_cast<int>(c.get_int("corpus.n_eval", 100));
    rc.corridor_width =
        c.get_double("scenario.corridor_width", rc.corridor_width);
    rc.max_obstacles =
        static_cast<int>(c.get_int("scenario.max_obstacles", 3));
    rc.speed_limit = c.get_double("scenario.speed_limit", rc.speed_limit);

    PolicyConfig& p = rc.policy;
    p.d_model = static_cast<int>(c.get_int("policy.d_model", p.d_model));
    p.n_layers = static_cast<int>(c.get_int("policy.n_layers", p.n_layers));
    p.n_heads = static_cast<int>(c.get_int("policy.n_heads", p.n_heads));
    p.d_ff = static_cast<int>(c.get_int("policy.d_ff", p.d_ff));
    p.k_history = static_cast<int>(c.get_int("policy.k_history", p.k_history));
    p.sparsifier.fusion_rate =
        c.get_double("sparsifier.fusion_rate", p.sparsifier.fusion_rate);
    p.sparsifier.temperature =
        c.get_double("sparsifier.temperature", p.sparsifier.temperature);

    rc.policy_train.epochs =
        static_cast<int>(c.get_int("policy.epochs", rc.policy_train.epochs));
    rc.policy_train.lr = c.get_double("policy.lr", rc.policy_train.lr);
    rc.policy_train.batch_size = static_cast<int>(
        c.get_int("policy.batch_size", rc.policy_train.batch_size));

    RefineConfig& r = rc.refine;
    r.lambda_reg = c.get_double("refine.lambda_reg", r.lambda_reg);
    r.lambda_kl = c.get_double("refine.lambda_kl", r.lambda_kl);
    r.n_candidates =
        static_cast<int>(c.get_int("refine.n_candidates", r.n_candidates));
    r.alpha = c.get_double("refine.alpha", r.alpha);
    r.d_z = static_cast<int>(c.get_int("refine.d_z", r.d_z));
    r.offset_bound = c.get_double("refine.offset_bound", r.offset_bound);

    rc.planner_train.epochs = static_cast<int>(
        c.get_int("planner.epochs", rc.planner_train.epochs));
    rc.planner_train.lr = c.get_double("planner.lr", rc.planner_train.lr);

    ScorerConfig& s = rc.scorer;
    s.lk_max_deviation =
        c.get_double("scorer.lk_max_deviation", s.lk_max_deviation);
    s.ttc_horizon = c.get_double("scorer.ttc_horizon", s.ttc_horizon);
    s.hc_max_accel = c.get_double("scorer.hc_max_accel", s.hc_max_accel);
    s.hc_max_jerk = c.get_double("scorer.hc_max_jerk", s.hc_max_jerk);
    s.ec_max_accel_delta =
        c.get_double("scorer.ec_max_accel_delta", s.ec_max_accel_delta);

    MetaActionConfig& m = s.meta;
    m.sharp_turn_deg = c.get_double("meta.sharp_turn_deg", m.sharp_turn_deg);
    m.slight_turn_deg =
        c.get_double("meta.slight_turn_deg", m.slight_turn_deg);
    m.lane_change_min_m =
        c.get_double("meta.lane_change_min_m", m.lane_change_min_m);
    m.lane_change_max_m =
        c.get_double("meta.lane_change_max_m", m.lane_change_max_m);
    m.straight_dlat_m =
        c.get_double("meta.straight_dlat_m", m.straight_dlat_m);
    m.straight_psi_deg =
        c.get_double("meta.straight_psi_deg", m.straight_psi_deg);

    rc.policy.validate();
    rc.refine.validate();
    if (rc.n_train < 1 || rc.n_eval < 0)
      throw InvalidConfigError("corpus: n_train >= 1, n_eval >= 0 required");
    return rc;
  }

  CameraRig rig() const {
    return make_default_rig(policy.patch_rows, policy.patch_cols);
  }
};

// Samples a feasible (lateral, longitudinal, obstacles) spec for one scene.
inline ScenarioSpec sample_spec(const RunConfig& rc, uint64_t base_seed,
                                int index) {
  Rng rng = Rng(base_seed).fork(static_cast<uint64_t>(index));
  ScenarioSpec spec;
  do {
    spec.lateral = static_cast<LateralPrimitive>(rng.uniform_int(kNumLateral));
    spec.longitudinal = static_cast<LongitudinalPrimitive>(
        rng.uniform_int(kNumLongitudinal));
  } while (!gen_detail::combo_feasible(spec.lateral, spec.longitudinal));
  spec.corridor_width = rc.corridor_width;
  spec.n_obstacles =
      static_cast<int>(rng.uniform_int(rc.max_obstacles + 1));
  spec.speed_limit = rc.speed_limit;
  spec.k_history = rc.policy.k_history;
  spec.seed = rng.next_u64();
  return spec;
}

inline void generate_corpus(const RunConfig& rc, const std::string& root,
                            int n, uint64_t base_seed, Manifest* manifest,
                            const std::string& rel_prefix) {
  ScenarioGenerator gen(rc.scorer.meta, rc.scorer);
  CameraRig rig = rc.rig();
  std::filesystem::create_directories(root);
  for (int i = 0; i < n; ++i) {
    GeneratedScene g = gen.generate_scene(sample_spec(rc, base_seed, i));
    g.inputs = gen.render_views(g.scene, rig);
    std::string dir = root + "/" + scene_dir_name(i);
    save_scene_dir(dir, g);
    if (manifest)
      for (const char* f : {"scene.txt", "gt.csv", "label.csv", "grids.bin"})
        manifest->add(rel_prefix + "/" + scene_dir_name(i) + "/" + f,
                      dir + "/" + f);
    if (i % 50 == 0) log_info("generated " + dir);
  }
}

inline PolicyTargets make_targets(const PolicyModel& model,
                                  const GeneratedScene& g) {
  PolicyTargets t;
  t.lat = static_cast<int>(g.oracle.lateral);
  t.lon = static_cast<int>(g.oracle.longitudinal);
  t.bins = model.encode_trajectory(g.gt);
  return t;
}

inline std::vector<GeneratedScene> load_corpus(const std::string& root) {
  std::vector<GeneratedScene> scenes;
  for (const std::string& dir : list_scene_dirs(root))
    scenes.push_back(load_scene_dir(dir));
  if (scenes.empty())
    throw IoError("missing input: no scene directories under " + root);
  return scenes;
}

inline void write_curve_csv(const std::string& path,
                            const std::vector<double>& losses) {
  CsvWriter w(path);
  w.row({"epoch", "loss"});
  for (size_t i = 0; i < losses.size(); ++i)
    w.row({std::to_string(i), fmt_double(losses[i])});
}

// --- subcommand bodies -----------------------------------------------------

inline void cmd_generate(const RunConfig& rc, const ConfigFile& cfg,
                         const std::string& out_dir) {
  Manifest manifest(cfg, rc.seed);
  generate_corpus(rc, out_dir, rc.n_train, rc.seed, &manifest, ".");
  manifest.write(out_dir + "/manifest.txt");
}

inline void cmd_label(const RunConfig& rc, const ConfigFile& cfg,
                      const std::string& traj_csv, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto trajs = read_trajectories_csv(traj_csv);
  auto labels = label_dataset(trajs, rc.scorer.meta);
  std::string out_csv = out_dir + "/labels.csv";
  CsvWriter w(out_csv);
  w.row({"traj_id", "lateral", "longitudinal"});
  for (size_t i = 0; i < labels.size(); ++i)
    w.row({std::to_string(i), to_string(labels[i].lateral),
           to_string(labels[i].longitudinal)});
  Manifest manifest(cfg, rc.seed);
  manifest.add("labels.csv", out_csv);
  manifest.write(out_dir + "/manifest.txt");
}

inline std::vector<double> train_policy_on(PolicyModel& model,
                                           const RunConfig& rc,
                                           const std::vector<GeneratedScene>&
                                               scenes) {
  std::vector<PolicySample> samples;
  for (const auto& g : scenes)
    samples.push_back({g.inputs, g.history, make_targets(model, g)});
  PolicyTrainConfig tc = rc.policy_train;
  tc.seed = rc.seed ^ 0x705c1ull;
  return model.train(samples, rc.rig(), tc);
}

inline void cmd_train_policy(const RunConfig& rc, const ConfigFile& cfg,
                             const std::string& scenes_dir,
                             const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto scenes = load_corpus(scenes_dir);
  PolicyModel model(rc.policy, rc.seed ^ 0x90de11ull);
  auto losses = train_policy_on(model, rc, scenes);
  model.save(out_dir + "/policy.ckpt");
  write_curve_csv(out_dir + "/policy_curve.csv", losses);
  Manifest manifest(cfg, rc.seed);
  manifest.add("policy.ckpt", out_dir + "/policy.ckpt");
  manifest.add("policy_curve.csv", out_dir + "/policy_curve.csv");
  manifest.write(out_dir + "/manifest.txt");
}

inline CoarsePlan coarse_plan_for(const PolicyModel& model,
                                  const CameraRig& rig,
                                  const GeneratedScene& g) {
  TokenSet scene_tokens = model.encode_scene(g.inputs, rig);
  return model.generate(scene_tokens, build_prompt(g.history));
}

inline std::vector<double> train_planner_on(
    PlannerModel& planner, const PolicyModel& policy, const RunConfig& rc,
    const std::vector<GeneratedScene>& scenes) {
  CameraRig rig = rc.rig();
  std::vector<PlannerSample> samples;
  for (const auto& g : scenes)
    samples.push_back({coarse_plan_for(policy, rig, g), g.scene, g.gt});
  Scorer scorer(rc.scorer);
  PlannerTrainConfig tc = rc.planner_train;
  tc.seed = rc.seed ^ 0x91a77ull;
  return planner.train(samples, scorer, tc);
}

inline void cmd_train_planner(const RunConfig& rc, const ConfigFile& cfg,
                              const std::string& scenes_dir,
                              const std::string& policy_ckpt,
                              const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto scenes = load_corpus(scenes_dir);
  PolicyModel policy(rc.policy, rc.seed ^ 0x90de11ull);
  policy.load(policy_ckpt);
  PlannerModel planner(rc.refine, rc.policy.n_waypoints, rc.policy.d_model,
                       rc.seed ^ 0xb1a2ull);
  auto losses = train_planner_on(planner, policy, rc, scenes);
  planner.save(out_dir + "/planner.ckpt");
  write_curve_csv(out_dir + "/planner_curve.csv", losses);
  Manifest manifest(cfg, rc.seed);
  manifest.add("planner.ckpt", out_dir + "/planner.ckpt");
  manifest.add("planner_curve.csv", out_dir + "/planner_curve.csv");
  manifest.write(out_dir + "/manifest.txt");
}

inline std::vector<std::string> scorecard_cells(const ScoreCard& c) {
  return {fmt_double(c.nc), fmt_double(c.dac), fmt_double(c.ddc),
          fmt_double(c.tlc), fmt_double(c.ep), fmt_double(c.ttc),
          fmt_double(c.lk), fmt_double(c.hc), fmt_double(c.ec),
          fmt_double(c.epdms)};
}

inline void cmd_refine(const RunConfig& rc, const ConfigFile& cfg,
                       const std::string& scene_dir,
                       const std::string& checkpoint_dir,
                       const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  GeneratedScene g = load_scene_dir(scene_dir);
  PolicyModel policy(rc.policy, rc.seed ^ 0x90de11ull);
  policy.load(checkpoint_dir + "/policy.ckpt");
  PlannerModel planner(rc.refine, rc.policy.n_waypoints, rc.policy.d_model,
                       rc.seed ^ 0xb1a2ull);
  planner.load(checkpoint_dir + "/planner.ckpt");
  Scorer scorer(rc.scorer);

  CoarsePlan coarse = coarse_plan_for(policy, rc.rig(), g);
  Rng rng = Rng(rc.seed).fork(0x4ef1ull);
  RefineResult r = planner.refine(coarse, g.scene, scorer, rng);

  // Row 0 = coarse, rows 1..n = candidates, last row = refined.
  std::vector<Trajectory> all = {coarse.trajectory};
  for (const auto& c : r.candidates) all.push_back(c);
  all.push_back(r.refined);
  write_trajectories_csv(out_dir + "/refine_trajectories.csv", all);

  CsvWriter sw(out_dir + "/refine_scores.csv");
  sw.row({"candidate_id", "selected", "nc", "dac", "ddc", "tlc", "ep", "ttc",
          "lk", "hc", "ec", "epdms"});
  for (size_t i = 0; i < r.cards.size(); ++i) {
    std::vector<std::string> row = {
        std::to_string(i), i == static_cast<size_t>(r.selected) ? "1" : "0"};
    for (auto& cell : scorecard_cells(r.cards[i])) row.push_back(cell);
    sw.row(row);
  }
  std::ofstream svg(out_dir + "/overlay.svg", std::ios::binary);
  svg << render_svg(g.scene, coarse.trajectory, r.candidates, r.refined);
  svg.close();

  Manifest manifest(cfg, rc.seed);
  manifest.add("refine_trajectories.csv",
               out_dir + "/refine_trajectories.csv");
  manifest.add("refine_scores.csv", out_dir + "/refine_scores.csv");
  manifest.add("overlay.svg", out_dir + "/overlay.svg");
  manifest.write(out_dir + "/manifest.txt");
}

inline void cmd_evaluate(const RunConfig& rc, const ConfigFile& cfg,
                         const std::string& scene_dir,
                         const std::string& traj_csv,
                         const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  GeneratedScene g = load_scene_dir(scene_dir);
  auto trajs = read_trajectories_csv(traj_csv);
  Scorer scorer(rc.scorer);
  std::string out_csv = out_dir + "/scorecards.csv";
  CsvWriter w(out_csv);
  w.row({"nc", "dac", "ddc", "tlc", "ep", "ttc", "lk", "hc", "ec", "epdms"});
  for (const auto& t : trajs) w.row(scorecard_cells(scorer.score(t, g.scene)));
  Manifest manifest(cfg, rc.seed);
  manifest.add("scorecards.csv", out_csv);
  manifest.write(out_dir + "/manifest.txt");
}

inline void cmd_bench_sparsify(const RunConfig& rc, const ConfigFile& cfg,
                               const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::string out_csv = out_dir + "/bench_sparsify.csv";
  CsvWriter w(out_csv);
  w.row({"seq_len", "fusion_rate", "flops_full", "flops_sparse",
         "reduction_pct"});
  const long long d = 256, layers = 4, heads = 4;
  for (long long n : {64, 128, 256, 576}) {
    for (double rate : {0.25, 0.5, rc.policy.sparsifier.fusion_rate, 1.0}) {
      long long kept = static_cast<long long>(
          std::ceil(static_cast<double>(n) * rate - 1e-12));
      double full = flops_estimate(n, d, layers, heads);
      double sparse = flops_estimate(kept, d, layers, heads);
      w.row({std::to_string(n), fmt_double(rate), fmt_double(full),
             fmt_double(sparse), fmt_double(100.0 * (1.0 - sparse / full))});
    }
  }
  Manifest manifest(cfg, rc.seed);
  manifest.add("bench_sparsify.csv", out_csv);
  manifest.write(out_dir + "/manifest.txt");
}

struct PipelineSummary {
  double mean_coarse = 0.0;
  double mean_refined = 0.0;
  int improved = 0;        // scenes with coarse < 1 where refined > coarse
  int improvable = 0;      // scenes with coarse < 1
};

inline PipelineSummary cmd_pipeline(const RunConfig& rc, const ConfigFile& cfg,
                                    const std::string& out_dir) {
  Manifest manifest(cfg, rc.seed);
  Rng seeder(rc.seed);
  uint64_t train_base = seeder.next_u64();
  uint64_t eval_base = seeder.next_u64();

  log_info("pipeline: generating corpora");
  generate_corpus(rc, out_dir + "/scenes/train", rc.n_train, train_base,
                  &manifest, "scenes/train");
  generate_corpus(rc, out_dir + "/scenes/eval", rc.n_eval, eval_base,
                  &manifest, "scenes/eval");
  auto train_scenes = load_corpus(out_dir + "/scenes/train");
  auto eval_scenes = load_corpus(out_dir + "/scenes/eval");

  log_info("pipeline: training policy");
  std::filesystem::create_directories(out_dir + "/checkpoints");
  PolicyModel policy(rc.policy, rc.seed ^ 0x90de11ull);
  auto policy_losses = train_policy_on(policy, rc, train_scenes);
  policy.save(out_dir + "/checkpoints/policy.ckpt");
  write_curve_csv(out_dir + "/checkpoints/policy_curve.csv", policy_losses);

  log_info("pipeline: training planner");
  PlannerModel planner(rc.refine, rc.policy.n_waypoints, rc.policy.d_model,
                       rc.seed ^ 0xb1a2ull);
  auto planner_losses = train_planner_on(planner, policy, rc, train_scenes);
  planner.save(out_dir + "/checkpoints/planner.ckpt");
  write_curve_csv(out_dir + "/checkpoints/planner_curve.csv", planner_losses);
  for (const char* f : {"policy.ckpt", "policy_curve.csv", "planner.ckpt",
                        "planner_curve.csv"})
    manifest.add(std::string("checkpoints/") + f,
                 out_dir + "/checkpoints/" + f);

  log_info("pipeline: evaluating");
  std::filesystem::create_directories(out_dir + "/eval");
  Scorer scorer(rc.scorer);
  CameraRig rig = rc.rig();
  std::string eval_csv = out_dir + "/eval/eval.csv";
  CsvWriter w(eval_csv);
  {
    std::vector<std::string> hdr = {"scene_id", "epdms_coarse",
                                    "epdms_refined"};
    const char* metrics[] = {"nc", "dac", "ddc", "tlc", "ep",
                             "ttc", "lk", "hc", "ec"};
    for (const char* m : metrics) hdr.push_back(std::string(m) + "_coarse");
    for (const char* m : metrics) hdr.push_back(std::string(m) + "_refined");
    w.row(hdr);
  }
  PipelineSummary sum;
  for (size_t i = 0; i < eval_scenes.size(); ++i) {
    const GeneratedScene& g = eval_scenes[i];
    CoarsePlan coarse = coarse_plan_for(policy, rig, g);
    ScoreCard cc = scorer.score(coarse.trajectory, g.scene);
    Rng rng = Rng(rc.seed ^ 0x0e7a1ull).fork(i);
    RefineResult r = planner.refine(coarse, g.scene, scorer, rng);
    const ScoreCard& rcard = r.cards[r.selected];

    std::vector<std::string> row = {std::to_string(i), fmt_double(cc.epdms),
                                    fmt_double(rcard.epdms)};
    auto ccs = scorecard_cells(cc), rcs = scorecard_cells(rcard);
    for (int m = 0; m < 9; ++m) row.push_back(ccs[m]);
    for (int m = 0; m < 9; ++m) row.push_back(rcs[m]);
    w.row(row);

    std::string svg_path = out_dir + "/eval/" + scene_dir_name(
                               static_cast<int>(i)) + ".svg";
    std::ofstream svg(svg_path, std::ios::binary);
    svg << render_svg(g.scene, coarse.trajectory, r.candidates, r.refined);
    svg.close();
    manifest.add("eval/" + scene_dir_name(static_cast<int>(i)) + ".svg",
                 svg_path);

    sum.mean_coarse += cc.epdms;
    sum.mean_refined += rcard.epdms;
    if (cc.epdms < 1.0) {
      ++sum.improvable;
      if (rcard.epdms > cc.epdms) ++sum.improved;
    }
  }
  manifest.add("eval/eval.csv", eval_csv);
  manifest.write(out_dir + "/manifest.txt");
  if (!eval_scenes.empty()) {
    sum.mean_coarse /= static_cast<double>(eval_scenes.size());
    sum.mean_refined /= static_cast<double>(eval_scenes.size());
  }
  log_info("pipeline: mean epdms coarse " + fmt_double(sum.mean_coarse) +
           " refined " + fmt_double(sum.mean_refined));
  return sum;
}

}  // namespace hist
