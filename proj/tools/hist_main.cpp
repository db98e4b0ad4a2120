// SPDX-License-Identifier: Apache-2.0
//
// hist: desk-scale driving-planning pipeline.
//
// Subcommands: generate, label, train-policy, train-planner, refine,
// evaluate, bench-sparsify, pipeline. Common flags: --config, --seed, --out,
// --scenes, --checkpoint, --n-candidates, --fusion-rate. Set HIST_LOG=1 for
// progress output.
//
// Exit codes: 0 ok, 64 usage, 2 invalid config, 3 missing input / IO error,
// 4 invalid input data, 5 scenario generation infeasible, 1 other failure.

#include <CLI11.hpp>
#include <cstdio>
#include <optional>
#include <string>

#include "hist/pipeline.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::string out_dir = "out";
  std::string scenes_dir;
  std::string checkpoint;
  std::string trajectories;
  std::optional<uint64_t> seed;
  std::optional<int> n_candidates;
  std::optional<double> fusion_rate;
};

hist::ConfigFile load_config(const Flags& f) {
  hist::ConfigFile cfg;
  if (!f.config_path.empty())
    cfg = hist::ConfigFile::parse_file(f.config_path);
  // Flags override file values.
  if (f.seed) cfg.set("run.seed", std::to_string(*f.seed));
  if (f.n_candidates)
    cfg.set("refine.n_candidates", std::to_string(*f.n_candidates));
  if (f.fusion_rate)
    cfg.set("sparsifier.fusion_rate", hist::fmt_double(*f.fusion_rate));
  return cfg;
}

std::string require(const std::string& value, const std::string& what) {
  if (value.empty())
    throw hist::InvalidConfigError("missing required flag: " + what);
  return value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hist: spatially-grounded driving policy + refinement planner"};
  app.require_subcommand(1);

  Flags f;
  app.add_option("--config", f.config_path, "config file (key = value)");
  app.add_option("--seed", f.seed, "master seed (overrides config)");
  app.add_option("--out", f.out_dir, "output directory");
  app.add_option("--scenes", f.scenes_dir, "scene directory (input)");
  app.add_option("--checkpoint", f.checkpoint,
                 "checkpoint file or directory (input)");
  app.add_option("--trajectories", f.trajectories,
                 "trajectory CSV (traj_id,t,x,y)");
  app.add_option("--n-candidates", f.n_candidates,
                 "refinement candidate count (overrides config)");
  app.add_option("--fusion-rate", f.fusion_rate,
                 "token retention fraction in (0,1] (overrides config)")
      ->check(CLI::Range(1e-9, 1.0));

  auto* c_generate = app.add_subcommand("generate", "write a scene corpus");
  auto* c_label = app.add_subcommand("label", "classify trajectories");
  auto* c_train_policy =
      app.add_subcommand("train-policy", "train the coarse policy");
  auto* c_train_planner =
      app.add_subcommand("train-planner", "train the refinement planner");
  auto* c_refine =
      app.add_subcommand("refine", "refine one scene's coarse plan");
  auto* c_evaluate = app.add_subcommand("evaluate", "score trajectories");
  auto* c_bench =
      app.add_subcommand("bench-sparsify", "sparsifier compute accounting");
  auto* c_pipeline =
      app.add_subcommand("pipeline", "generate + train + refine + evaluate");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 64;
  }

  try {
    hist::ConfigFile cfg = load_config(f);
    hist::RunConfig rc = hist::RunConfig::from_config(cfg);
    if (c_generate->parsed()) {
      hist::cmd_generate(rc, cfg, f.out_dir);
    } else if (c_label->parsed()) {
      hist::cmd_label(rc, cfg, require(f.trajectories, "--trajectories"),
                      f.out_dir);
    } else if (c_train_policy->parsed()) {
      hist::cmd_train_policy(rc, cfg, require(f.scenes_dir, "--scenes"),
                             f.out_dir);
    } else if (c_train_planner->parsed()) {
      hist::cmd_train_planner(rc, cfg, require(f.scenes_dir, "--scenes"),
                              require(f.checkpoint, "--checkpoint") +
                                  "/policy.ckpt",
                              f.out_dir);
    } else if (c_refine->parsed()) {
      hist::cmd_refine(rc, cfg, require(f.scenes_dir, "--scenes"),
                       require(f.checkpoint, "--checkpoint"), f.out_dir);
    } else if (c_evaluate->parsed()) {
      hist::cmd_evaluate(rc, cfg, require(f.scenes_dir, "--scenes"),
                         require(f.trajectories, "--trajectories"), f.out_dir);
    } else if (c_bench->parsed()) {
      hist::cmd_bench_sparsify(rc, cfg, f.out_dir);
    } else if (c_pipeline->parsed()) {
      hist::cmd_pipeline(rc, cfg, f.out_dir);
    }
  } catch (const hist::InvalidConfigError& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return 2;
  } catch (const hist::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const hist::InvalidInputError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 4;
  } catch (const hist::GenerationError& e) {
    std::fprintf(stderr, "generation error: %s\n", e.what());
    return 5;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
