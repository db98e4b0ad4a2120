// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical trajectory refinement: confidence-aware VAE perturbation of
// the coarse trajectory, cross-attention alignment with the driving-command
// embedding, additive-offset candidate generation and scorer-guided
// selection. Trained by minimizing the weighted L1 + KL refinement loss of
// the selected candidate.
#pragma once

#include <string>
#include <vector>

#include "hist/checkpoint.hpp"
#include "hist/nn.hpp"
#include "hist/policy.hpp"
#include "hist/scorer.hpp"

namespace hist {

struct LatentSample {
  VecXd mu;
  double sigma2 = 0.0;  // alpha * (1 - s), shared across dimensions
  VecXd z;
  double alpha = 0.0;
  double s = 1.0;
};

struct RefineConfig {
  double lambda_reg = 1.0;
  double lambda_kl = 0.1;
  int n_candidates = 16;
  double alpha = 0.5;
  int d_z = 32;
  double offset_bound = 5.0;  // meters, per-coordinate saturation

  void validate() const {
    if (lambda_reg < 0 || lambda_kl < 0)
      throw InvalidConfigError("refine: loss weights must be non-negative");
    if (n_candidates < 1) throw InvalidConfigError("refine: n_candidates >= 1");
    if (!(alpha > 0)) throw InvalidConfigError("refine: alpha must be > 0");
    if (d_z < 1) throw InvalidConfigError("refine: d_z must be >= 1");
  }
};

// Closed-form KL(N(mu, sigma2*I) || N(0, I)).
inline double kl_divergence(const VecXd& mu, double sigma2) {
  if (!(sigma2 > 0.0))
    throw InvalidInputError("kl_divergence: sigma2 must be > 0");
  double d = static_cast<double>(mu.size());
  return 0.5 * (d * (sigma2 - 1.0 - std::log(sigma2)) + mu.squaredNorm());
}

inline double l1_deviation(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size())
    throw InvalidInputError("l1_deviation: length mismatch");
  double acc = 0.0;
  for (int i = 0; i < a.size(); ++i)
    acc += std::abs(a.waypoints[i].x() - b.waypoints[i].x()) +
           std::abs(a.waypoints[i].y() - b.waypoints[i].y());
  return acc / (2.0 * a.size());
}

inline double refine_loss(const Trajectory& candidate, const Trajectory& gt,
                          const VecXd& mu, double sigma2,
                          const RefineConfig& cfg) {
  if (!mu.allFinite() || !std::isfinite(sigma2))
    throw InvalidInputError("refine_loss: non-finite inputs");
  return cfg.lambda_reg * l1_deviation(candidate, gt) +
         cfg.lambda_kl * kl_divergence(mu, sigma2);
}

// Analytic partial derivatives of refine_loss, for gradient checking.
struct RefineLossGrad {
  std::vector<Vec2> d_waypoints;
  VecXd d_mu;
  double d_sigma2 = 0.0;
};

inline RefineLossGrad refine_loss_grad(const Trajectory& candidate,
                                       const Trajectory& gt, const VecXd& mu,
                                       double sigma2,
                                       const RefineConfig& cfg) {
  RefineLossGrad g;
  double n2 = 2.0 * candidate.size();
  for (int i = 0; i < candidate.size(); ++i) {
    Vec2 d = candidate.waypoints[i] - gt.waypoints[i];
    g.d_waypoints.emplace_back(
        cfg.lambda_reg * ((d.x() > 0) - (d.x() < 0)) / n2,
        cfg.lambda_reg * ((d.y() > 0) - (d.y() < 0)) / n2);
  }
  g.d_mu = cfg.lambda_kl * mu;
  double dz = static_cast<double>(mu.size());
  g.d_sigma2 = cfg.lambda_kl * 0.5 * dz * (1.0 - 1.0 / sigma2);
  return g;
}

struct RefineResult {
  LatentSample latent;
  VecXd aligned;
  std::vector<Trajectory> candidates;
  std::vector<ScoreCard> cards;
  int selected = 0;
  Trajectory refined;
};

struct PlannerTrainConfig {
  int epochs = 20;
  double lr = 0.015;
  uint64_t seed = 7;
};

struct PlannerSample {
  CoarsePlan coarse;   // from the frozen policy
  Scene scene;
  Trajectory gt;
};

class PlannerModel {
 public:
  PlannerModel(RefineConfig cfg, int n_waypoints = 8, int d_cmd = 128,
               uint64_t seed = 43)
      : cfg_(cfg), n_wp_(n_waypoints), d_cmd_(d_cmd) {
    cfg_.validate();
    Rng rng(seed);
    const int dz = cfg_.d_z;
    enc1_.init(ps_, "vae.enc1", 2 * n_wp_, 64, rng);
    enc2_.init(ps_, "vae.enc2", 64, dz, rng);
    cmd_emb_ = ps_.create("align.cmd_emb", kNumLateral * kNumLongitudinal,
                          d_cmd_, rng, 0.1);
    // Zero output projection: alignment starts as the identity residual.
    cross_attn_.init(ps_, "align.attn", dz, 4, rng, d_cmd_,
                     /*zero_output=*/true);
    idx_emb_ = ps_.create("decoder.idx_emb", cfg_.n_candidates, 16, rng, 0.5);
    dec1_.init(ps_, "decoder.fc1", dz + 16, 64, rng);
    // Small non-zero init: candidates start as gentle perturbations so the
    // scorer-selected winner carries a training signal from step one.
    dec2_.init(ps_, "decoder.fc2", 64, 2 * n_wp_, rng, 0.02);
  }

  const RefineConfig& config() const { return cfg_; }
  ParamStore& params() { return ps_; }

  // Coordinates normalized to roughly unit scale for the encoder.
  Eigen::RowVectorXd flatten(const Trajectory& traj) const {
    Eigen::RowVectorXd f(2 * n_wp_);
    for (int i = 0; i < n_wp_; ++i) {
      f[2 * i] = traj.waypoints[i].x() / 30.0;
      f[2 * i + 1] = traj.waypoints[i].y() / 10.0;
    }
    return f;
  }

  // Confidence-aware reparameterized sampling: z = mu + sqrt(alpha(1-s))*eta.
  LatentSample encode_vae(const Trajectory& traj, double s, double alpha,
                          Rng& rng) const {
    if (!(s > 0.0 && s <= 1.0))
      throw InvalidInputError("encode_vae: confidence must be in (0,1]");
    if (!(alpha > 0.0))
      throw InvalidInputError("encode_vae: alpha must be > 0");
    LatentSample l;
    l.alpha = alpha;
    l.s = s;
    l.sigma2 = alpha * (1.0 - s);
    l.mu = encode_mu(traj);
    double sigma = std::sqrt(l.sigma2);
    l.z = l.sigma2 == 0.0 ? l.mu : VecXd(l.mu + sigma * rng.normal_vec(cfg_.d_z));
    return l;
  }

  VecXd encode_mu(const Trajectory& traj) const {
    Tape t;
    return encode_mu_graph(t, t.constant(flatten(traj)))->v.row(0).transpose();
  }

  VecXd align_command(const VecXd& z, const DrivingCommand& cmd) const {
    Tape t;
    return align_graph(t, t.constant(z.transpose()), cmd)->v.row(0)
        .transpose();
  }

  std::vector<Trajectory> generate_candidates(const VecXd& aligned,
                                              const Trajectory& base,
                                              int n) const {
    if (n < 1) throw InvalidInputError("generate_candidates: n must be >= 1");
    if (n > cfg_.n_candidates)
      throw InvalidConfigError(
          "generate_candidates: n exceeds configured candidate count");
    Tape t;
    std::vector<Trajectory> out;
    for (int i = 0; i < n; ++i) {
      TPtr off = offsets_graph(t, t.constant(aligned.transpose()), i);
      out.push_back(apply_offsets(base, off->v.row(0)));
    }
    return out;
  }

  // Scores every candidate and returns the argmax (ties: lowest index).
  // Scorer failures demote the candidate to score 0.
  std::pair<int, std::vector<ScoreCard>> score_and_select(
      const std::vector<Trajectory>& candidates, const Scene& scene,
      const Scorer& scorer) const {
    if (candidates.empty())
      throw InvalidInputError("score_and_select: no candidates");
    std::vector<ScoreCard> cards;
    int best = 0;
    double best_score = -1.0;
    for (size_t i = 0; i < candidates.size(); ++i) {
      ScoreCard c;
      try {
        c = scorer.score(candidates[i], scene);
      } catch (const std::exception&) {
        c = ScoreCard{};
        c.epdms = 0.0;  // failed candidates lose
      }
      cards.push_back(c);
      if (c.epdms > best_score) {
        best_score = c.epdms;
        best = static_cast<int>(i);
      }
    }
    return {best, cards};
  }

  // Full refinement pass for one coarse plan.
  RefineResult refine(const CoarsePlan& plan, const Scene& scene,
                      const Scorer& scorer, Rng& rng) const {
    RefineResult r;
    r.latent = encode_vae(plan.trajectory, plan.conf, cfg_.alpha, rng);
    r.aligned = align_command(r.latent.z, plan.command);
    r.candidates =
        generate_candidates(r.aligned, plan.trajectory, cfg_.n_candidates);
    auto [best, cards] = score_and_select(r.candidates, scene, scorer);
    r.selected = best;
    r.cards = std::move(cards);
    r.refined = r.candidates[best];
    return r;
  }

  // Stage-3 training: gradients flow through the scorer-selected candidate
  // only (selection itself is a detached argmax).
  std::vector<double> train(const std::vector<PlannerSample>& dataset,
                            const Scorer& scorer,
                            const PlannerTrainConfig& tc) {
    if (dataset.empty())
      throw InvalidInputError("train_planner: empty dataset");
    Rng rng(tc.seed);
    std::vector<double> history;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
      double epoch_loss = 0.0;
      for (const PlannerSample& smp : dataset) {
        // Confidence clamped away from 1 so the KL term stays finite.
        double s = std::min(smp.coarse.conf, 1.0 - 1e-6);
        double sigma2 = cfg_.alpha * (1.0 - s);
        Tape t;
        TPtr mu = encode_mu_graph(
            t, t.constant(flatten(smp.coarse.trajectory)));
        VecXd eta = rng.normal_vec(cfg_.d_z);
        TPtr z = t.add(mu,
                       t.constant(std::sqrt(sigma2) * eta.transpose()));
        TPtr aligned = align_graph(t, z, smp.coarse.command);
        // Candidate values for selection, then the loss on the winner.
        std::vector<TPtr> cand_offsets;
        std::vector<Trajectory> cands;
        for (int i = 0; i < cfg_.n_candidates; ++i) {
          cand_offsets.push_back(offsets_graph(t, aligned, i));
          cands.push_back(apply_offsets(smp.coarse.trajectory,
                                        cand_offsets.back()->v.row(0)));
        }
        auto [best, cards] = score_and_select(cands, smp.scene, scorer);
        MatXd base_flat(1, 2 * n_wp_);
        MatXd gt_flat(1, 2 * n_wp_);
        for (int i = 0; i < n_wp_; ++i) {
          base_flat(0, 2 * i) = smp.coarse.trajectory.waypoints[i].x();
          base_flat(0, 2 * i + 1) = smp.coarse.trajectory.waypoints[i].y();
          gt_flat(0, 2 * i) = smp.gt.waypoints[i].x();
          gt_flat(0, 2 * i + 1) = smp.gt.waypoints[i].y();
        }
        TPtr cand_flat =
            t.add(cand_offsets[best], t.constant(base_flat));
        TPtr loss = t.add(
            t.scale(t.l1_loss(cand_flat, gt_flat), cfg_.lambda_reg),
            t.scale(t.kl_gauss(mu, std::max(sigma2, 1e-12)),
                    cfg_.lambda_kl));
        double lv = loss->v(0, 0);
        if (!std::isfinite(lv))
          throw std::runtime_error("train_planner: non-finite loss");
        epoch_loss += lv;
        ps_.zero_grad();
        t.backward(loss);
        ps_.sgd_step(tc.lr);
      }
      history.push_back(epoch_loss / static_cast<double>(dataset.size()));
    }
    return history;
  }

  void save(const std::string& path) const { save_checkpoint(path, ps_); }
  void load(const std::string& path) { load_checkpoint(path, ps_); }

  // Graph builders shared by training and the plain-value wrappers.
  TPtr encode_mu_graph(Tape& t, const TPtr& flat) const {
    return enc2_.forward(t, t.tanh_act(enc1_.forward(t, flat)));
  }

  TPtr align_graph(Tape& t, const TPtr& z_row, const DrivingCommand& cmd)
      const {
    int cmd_idx = static_cast<int>(cmd.lateral) * kNumLongitudinal +
                  static_cast<int>(cmd.longitudinal);
    TPtr cmd_row = t.gather_rows(cmd_emb_, {cmd_idx});
    TPtr att = cross_attn_.forward(t, z_row, cmd_row);
    return t.add(z_row, att);
  }

  // Candidate index doubles as a step-size schedule: index 0 stays on the
  // base trajectory and later indices take increasingly large steps along
  // their decoded direction, so selection acts as a guarded line search.
  double cand_scale(int cand_idx) const {
    if (cfg_.n_candidates == 1) return 1.0;
    return static_cast<double>(cand_idx) /
           static_cast<double>(cfg_.n_candidates - 1);
  }

  TPtr offsets_graph(Tape& t, const TPtr& aligned_row, int cand_idx) const {
    TPtr idx = t.gather_rows(idx_emb_, {cand_idx});
    TPtr h = t.tanh_act(dec1_.forward(t, t.concat_cols({aligned_row, idx})));
    return t.scale(t.tanh_act(dec2_.forward(t, h)),
                   cfg_.offset_bound * cand_scale(cand_idx));
  }

  Trajectory apply_offsets(const Trajectory& base,
                           const Eigen::RowVectorXd& off) const {
    Trajectory out = base;
    for (int i = 0; i < n_wp_; ++i) {
      out.waypoints[i].x() += off[2 * i];
      out.waypoints[i].y() += off[2 * i + 1];
    }
    return out;
  }

 private:
  RefineConfig cfg_;
  int n_wp_;
  int d_cmd_;
  ParamStore ps_;
  Linear enc1_, enc2_;
  TPtr cmd_emb_;
  MultiHeadAttention cross_attn_;
  TPtr idx_emb_;
  Linear dec1_, dec2_;
};

}  // namespace hist
