// SPDX-License-Identifier: Apache-2.0
//
// Toy autoregressive transformer policy: consumes sparsified spatial tokens
// plus a temporal prompt and emits a granular driving command, a coarse
// trajectory and a confidence score. Decoding order is fixed: the two
// command tokens first, then the 2x8 waypoint-bin tokens.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "hist/checkpoint.hpp"
#include "hist/geometry.hpp"
#include "hist/meta_action.hpp"
#include "hist/nn.hpp"
#include "hist/sparsifier.hpp"

namespace hist {

enum class NavManeuver { Left, Straight, Right };

struct EgoState {
  double vx = 0, vy = 0, ax = 0, ay = 0;
};

// Temporal prompt: maneuver labels and ego states for steps t .. t-k, plus
// the fixed instruction token appended by build_prompt.
struct PromptHistory {
  std::vector<NavManeuver> nav;
  std::vector<EgoState> ego;

  int k() const { return static_cast<int>(nav.size()) - 1; }

  void validate() const {
    if (nav.empty() || nav.size() != ego.size())
      throw InvalidInputError("prompt history: nav/ego lists must be equal "
                              "non-empty length");
  }
};

// One row per prompt token, 8 features: maneuver one-hot (3), normalized ego
// state (4), instruction flag (1). Length = k+2.
inline MatXd build_prompt(const PromptHistory& h) {
  h.validate();
  const int n = static_cast<int>(h.nav.size());
  MatXd out = MatXd::Zero(n + 1, 8);
  for (int i = 0; i < n; ++i) {
    out(i, static_cast<int>(h.nav[i])) = 1.0;
    out(i, 3) = h.ego[i].vx / 20.0;
    out(i, 4) = h.ego[i].vy / 20.0;
    out(i, 5) = h.ego[i].ax / 5.0;
    out(i, 6) = h.ego[i].ay / 5.0;
  }
  out(n, 7) = 1.0;  // instruction token
  return out;
}

// Geometric mean of per-token max-softmax probabilities.
inline double confidence(const std::vector<double>& token_probs) {
  if (token_probs.empty())
    throw InvalidInputError("confidence: empty probability list");
  double acc = 0.0;
  for (double p : token_probs) {
    if (!(p > 0.0 && p <= 1.0))
      throw InvalidInputError("confidence: probabilities must be in (0,1]");
    acc += std::log(p);
  }
  return std::exp(acc / static_cast<double>(token_probs.size()));
}

struct PolicyConfig {
  int d_model = 128;
  int n_layers = 4;
  int n_heads = 4;
  int d_ff = 256;
  int d_vision = 126;  // divisible by 6 (position bands) and vision_heads
  int vision_heads = 6;
  int vision_ff = 252;
  int patch_rows = 4, patch_cols = 4;
  int raster_channels = 4;
  int n_views = 3;
  int k_history = 3;
  // Waypoint-bin vocabulary.
  double x_min = -5.0, x_max = 60.0;
  double y_min = -15.0, y_max = 15.0;
  double bin_width = 0.5;
  int n_waypoints = 8;
  double waypoint_dt = 0.5;
  SparsifierConfig sparsifier;

  int n_x_bins() const {
    return static_cast<int>(std::llround((x_max - x_min) / bin_width));
  }
  int n_y_bins() const {
    return static_cast<int>(std::llround((y_max - y_min) / bin_width));
  }
  int tokens_per_view() const { return patch_rows * patch_cols; }
  int scene_tokens_raw() const { return n_views * tokens_per_view(); }
  int scene_tokens_kept() const {
    return static_cast<int>(std::ceil(
        scene_tokens_raw() * sparsifier.fusion_rate - 1e-12));
  }
  int prompt_len() const { return k_history + 2; }
  // BOS + lat + lon + 15 of the 16 bin tokens are fed; 18 predictions.
  int output_len() const { return 2 + 2 * n_waypoints; }
  int seq_len() const {
    return scene_tokens_kept() + prompt_len() + output_len();
  }

  void validate() const {
    if (d_model % n_heads != 0)
      throw InvalidConfigError("policy: d_model must divide by n_heads");
    if (d_vision % 6 != 0)
      throw InvalidConfigError("policy: d_vision must be divisible by 6");
    if (d_vision % vision_heads != 0)
      throw InvalidConfigError("policy: d_vision must divide by vision_heads");
    if (n_waypoints < 1 || k_history < 0)
      throw InvalidConfigError("policy: bad sequence configuration");
    sparsifier.validate();
  }
};

// Per-view rasterized inputs: raster[v] is (patch_rows*patch_cols) x
// raster_channels, depth[v] is patch_rows x patch_cols (meters).
struct SceneInputs {
  std::vector<MatXd> raster;
  std::vector<MatXd> depth;
};

struct PolicyTargets {
  int lat = 0;
  int lon = 0;
  std::array<int, 16> bins{};  // interleaved x1,y1,...,x8,y8
};

struct CoarsePlan {
  DrivingCommand command;
  Trajectory trajectory;
  double conf = 1.0;  // epsilon: geometric mean of token_probs
  std::vector<double> token_probs;
};

struct PolicySample {
  SceneInputs inputs;
  PromptHistory history;
  PolicyTargets targets;
};

struct PolicyTrainConfig {
  int epochs = 30;
  double lr = 0.1;
  int batch_size = 8;
  uint64_t seed = 1;
};

class PolicyModel {
 public:
  explicit PolicyModel(PolicyConfig cfg, uint64_t seed = 42) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const int dv = cfg_.d_vision;
    const int d = cfg_.d_model;
    patch_embed_.init(ps_, "vision.patch_embed", cfg_.raster_channels, dv,
                      rng);
    pos_enc1_.init(ps_, "vision.pos_enc1", dv, dv, rng, 0.1);
    pos_enc2_.init(ps_, "vision.pos_enc2", dv, dv, rng, 0.1);
    vision_block_.init(ps_, "vision.block", dv, cfg_.vision_heads,
                       cfg_.vision_ff, rng);
    fusion_mixing_ = ps_.create_value("sparsifier.mixing",
                                      MatXd::Identity(dv, dv));
    fusion_bias_ = ps_.create_zero("sparsifier.bias", 1, dv);
    scene_proj_.init(ps_, "llm.scene_proj", dv, d, rng);
    prompt_proj_.init(ps_, "llm.prompt_proj", 8, d, rng);
    lat_emb_ = ps_.create("llm.emb.lat", kNumLateral, d, rng, 0.02);
    lon_emb_ = ps_.create("llm.emb.lon", kNumLongitudinal, d, rng, 0.02);
    x_emb_ = ps_.create("llm.emb.x", cfg_.n_x_bins(), d, rng, 0.02);
    y_emb_ = ps_.create("llm.emb.y", cfg_.n_y_bins(), d, rng, 0.02);
    bos_emb_ = ps_.create("llm.emb.bos", 1, d, rng, 0.02);
    pos_emb_ = ps_.create("llm.emb.pos", cfg_.seq_len(), d, rng, 0.02);
    blocks_.resize(cfg_.n_layers);
    for (int l = 0; l < cfg_.n_layers; ++l)
      blocks_[l].init(ps_, "llm.block" + std::to_string(l), d, cfg_.n_heads,
                      cfg_.d_ff, rng);
    final_ln_.init(ps_, "llm.final_ln", d);
    // Zero-init heads: uniform output distributions at initialization.
    head_lat_.init_zero(ps_, "llm.head.lat", d, kNumLateral);
    head_lon_.init_zero(ps_, "llm.head.lon", d, kNumLongitudinal);
    head_x_.init_zero(ps_, "llm.head.x", d, cfg_.n_x_bins());
    head_y_.init_zero(ps_, "llm.head.y", d, cfg_.n_y_bins());
  }

  const PolicyConfig& config() const { return cfg_; }
  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }

  // Vision encoding + sparsification on raw rasterized inputs. Builds the
  // spatial tokens in-graph so training can reach the vision parameters;
  // for inference call it with a throwaway tape.
  TPtr encode_scene_graph(Tape& t, const SceneInputs& in, const CameraRig& rig,
                          std::vector<int>* kept_out = nullptr,
                          VecXd* salience_out = nullptr,
                          std::vector<Vec3>* positions_out = nullptr) const {
    if (static_cast<int>(in.raster.size()) != cfg_.n_views ||
        static_cast<int>(in.depth.size()) != cfg_.n_views)
      throw InvalidInputError("encode_scene: wrong number of views");
    std::vector<TPtr> view_tokens;
    if (positions_out) positions_out->clear();
    for (int v = 0; v < cfg_.n_views; ++v) {
      if (in.raster[v].rows() != cfg_.tokens_per_view() ||
          in.raster[v].cols() != cfg_.raster_channels)
        throw InvalidInputError("encode_scene: raster shape mismatch");
      TPtr feats = patch_embed_.forward(t, t.constant(in.raster[v]));
      // Constant sinusoidal features of the back-projected patch centers.
      MatXd sin_feats(cfg_.tokens_per_view(), cfg_.d_vision);
      for (int r = 0; r < cfg_.patch_rows; ++r)
        for (int c = 0; c < cfg_.patch_cols; ++c) {
          Vec2 px = patch_center(r, c, cfg_.patch_rows, cfg_.patch_cols,
                                 rig.intrinsics[v]);
          Vec3 p_ego = to_ego_frame(
              back_project(px.x(), px.y(), in.depth[v](r, c),
                           rig.intrinsics[v]),
              rig.extrinsics[v]);
          if (positions_out) positions_out->push_back(p_ego);
          sin_feats.row(r * cfg_.patch_cols + c) =
              sinusoidal_features(p_ego, cfg_.d_vision).transpose();
        }
      TPtr pe = pos_enc2_.forward(
          t, t.tanh_act(pos_enc1_.forward(t, t.constant(sin_feats))));
      view_tokens.push_back(t.add(feats, pe));
    }
    TPtr x = t.concat_rows(view_tokens);
    MatXd attn;
    TPtr encoded = vision_block_.forward(t, x, nullptr, &attn);
    // Salience and fusion assignment are computed from forward values; the
    // gradient flows through the weighted average and the mixing layer only.
    VecXd salience = attn.colwise().mean().transpose();
    auto [kept, pruned] =
        partition_topk(salience, cfg_.sparsifier.fusion_rate);
    MatXd avg = fusion_average_matrix(encoded->v, salience, kept, pruned,
                                      cfg_.sparsifier.temperature);
    TPtr fused = t.add_rowvec(
        t.matmul(t.matmul(t.constant(avg), encoded), fusion_mixing_),
        fusion_bias_);
    if (kept_out) *kept_out = kept;
    if (salience_out) *salience_out = salience;
    return fused;
  }

  // Inference-facing scene encoding producing the reduced TokenSet.
  TokenSet encode_scene(const SceneInputs& in, const CameraRig& rig) const {
    Tape t;
    std::vector<int> kept;
    VecXd salience;
    std::vector<Vec3> all_pos;
    TPtr fused = encode_scene_graph(t, in, rig, &kept, &salience, &all_pos);
    TokenSet out;
    out.tokens = fused->v;
    out.positions.resize(kept.size());
    out.salience.resize(kept.size());
    for (size_t i = 0; i < kept.size(); ++i) {
      out.positions[i] = all_pos[kept[i]];
      out.salience[i] = salience[kept[i]];
    }
    return out;
  }

  struct ForwardResult {
    MatXd lat_probs;  // 1 x 8
    MatXd lon_probs;  // 1 x 9
    MatXd x_probs;    // n_waypoints x n_x_bins
    MatXd y_probs;    // n_waypoints x n_y_bins
    double loss = 0.0;
  };

  // Teacher-forced forward over a reduced token set. Softmax distributions
  // for every emitted token; loss populated when targets are given.
  ForwardResult forward(const TokenSet& scene, const MatXd& prompt,
                        const PolicyTargets* targets = nullptr) const {
    Tape t;
    TPtr scene_t = t.constant(scene.tokens);
    TPtr loss;
    return forward_from(t, scene_t, prompt, targets, &loss);
  }

  // Shared graph builder; scene is a (possibly gradient-carrying) tensor of
  // reduced d_vision tokens.
  ForwardResult forward_from(Tape& t, const TPtr& scene_dvis,
                             const MatXd& prompt, const PolicyTargets* targets,
                             TPtr* loss_out) const {
    if (scene_dvis->v.cols() != cfg_.d_vision)
      throw InvalidConfigError("policy forward: scene token width mismatch");
    if (prompt.rows() != cfg_.prompt_len() || prompt.cols() != 8)
      throw InvalidConfigError("policy forward: prompt shape mismatch");
    PolicyTargets tf;  // teacher-forcing inputs; zeros if absent
    if (targets) tf = *targets;

    TPtr scene_e = scene_proj_.forward(t, scene_dvis);
    TPtr prompt_e = prompt_proj_.forward(t, t.constant(prompt));
    std::vector<TPtr> out_rows;
    out_rows.push_back(bos_emb_);
    out_rows.push_back(t.gather_rows(lat_emb_, {tf.lat}));
    out_rows.push_back(t.gather_rows(lon_emb_, {tf.lon}));
    for (int i = 0; i < 2 * cfg_.n_waypoints - 1; ++i) {
      const TPtr& table = (i % 2 == 0) ? x_emb_ : y_emb_;
      out_rows.push_back(t.gather_rows(table, {tf.bins[i]}));
    }
    TPtr seq = t.concat_rows({scene_e, prompt_e, t.concat_rows(out_rows)});
    const int s = static_cast<int>(seq->v.rows());
    seq = t.add(seq, t.slice_rows(pos_emb_, 0, s));
    const int prefix = static_cast<int>(scene_e->v.rows()) + cfg_.prompt_len();
    MatXd mask = prefix_causal_mask(s, prefix);
    for (const auto& b : blocks_) seq = b.forward(t, seq, &mask);
    TPtr hidden = final_ln_.forward(t, seq);

    TPtr h_lat = t.slice_rows(hidden, prefix, 1);
    TPtr h_lon = t.slice_rows(hidden, prefix + 1, 1);
    std::vector<TPtr> hx_rows, hy_rows;
    for (int i = 0; i < cfg_.n_waypoints; ++i) {
      hx_rows.push_back(t.slice_rows(hidden, prefix + 2 + 2 * i, 1));
      hy_rows.push_back(t.slice_rows(hidden, prefix + 3 + 2 * i, 1));
    }
    TPtr logit_lat = head_lat_.forward(t, h_lat);
    TPtr logit_lon = head_lon_.forward(t, h_lon);
    TPtr logit_x = head_x_.forward(t, t.concat_rows(hx_rows));
    TPtr logit_y = head_y_.forward(t, t.concat_rows(hy_rows));

    ForwardResult r;
    r.lat_probs = t.row_softmax(logit_lat)->v;
    r.lon_probs = t.row_softmax(logit_lon)->v;
    r.x_probs = t.row_softmax(logit_x)->v;
    r.y_probs = t.row_softmax(logit_y)->v;

    if (targets && loss_out) {
      std::vector<int> xt, yt;
      for (int i = 0; i < cfg_.n_waypoints; ++i) {
        xt.push_back(targets->bins[2 * i]);
        yt.push_back(targets->bins[2 * i + 1]);
      }
      double nw = static_cast<double>(cfg_.n_waypoints);
      double total = 2.0 + 2.0 * nw;
      TPtr loss = t.scale(
          t.add(t.add(t.cross_entropy(logit_lat, {targets->lat}),
                      t.cross_entropy(logit_lon, {targets->lon})),
                t.add(t.scale(t.cross_entropy(logit_x, xt), nw),
                      t.scale(t.cross_entropy(logit_y, yt), nw))),
          1.0 / total);
      r.loss = loss->v(0, 0);
      *loss_out = loss;
    }
    return r;
  }

  // Greedy autoregressive decoding with a per-layer key/value cache. The
  // prefix-causal mask makes each prediction depend only on the prefix and
  // the tokens already chosen, so incrementally extending the sequence one
  // row at a time reproduces the teacher-forced forward exactly. Token
  // confidences are the max softmax probabilities of the 18 emitted tokens.
  CoarsePlan generate(const TokenSet& scene, const MatXd& prompt) const {
    if (scene.tokens.cols() != cfg_.d_vision)
      throw InvalidConfigError("policy generate: scene token width mismatch");
    if (prompt.rows() != cfg_.prompt_len() || prompt.cols() != 8)
      throw InvalidConfigError("policy generate: prompt shape mismatch");
    const int d = cfg_.d_model;
    MatXd scene_e = ((scene.tokens * scene_proj_.w->v).rowwise() +
                     scene_proj_.b->v.row(0));
    MatXd prompt_e =
        ((prompt * prompt_proj_.w->v).rowwise() + prompt_proj_.b->v.row(0));
    const int prefix = static_cast<int>(scene_e.rows() + prompt_e.rows());
    MatXd pre(prefix, d);
    pre << scene_e, prompt_e;
    pre += pos_emb_->v.topRows(prefix);
    std::vector<MatXd> kc(cfg_.n_layers, MatXd(0, d));
    std::vector<MatXd> vc(cfg_.n_layers, MatXd(0, d));
    decode_blocks(std::move(pre), kc, vc);  // fill the prefix cache

    PolicyTargets fed{};
    std::vector<double> probs;
    auto pick = [&](const Eigen::RowVectorXd& logits) {
      Eigen::RowVectorXd e = (logits.array() - logits.maxCoeff()).exp();
      Eigen::RowVectorXd p = e / e.sum();
      int idx = 0;
      probs.push_back(p.maxCoeff(&idx));
      return idx;
    };
    for (int step = 0; step < 2 + 2 * cfg_.n_waypoints; ++step) {
      Eigen::RowVectorXd emb;
      if (step == 0) emb = bos_emb_->v.row(0);
      else if (step == 1) emb = lat_emb_->v.row(fed.lat);
      else if (step == 2) emb = lon_emb_->v.row(fed.lon);
      else if ((step - 3) % 2 == 0) emb = x_emb_->v.row(fed.bins[step - 3]);
      else emb = y_emb_->v.row(fed.bins[step - 3]);
      MatXd row = emb + pos_emb_->v.row(prefix + step);
      MatXd h = decode_blocks(std::move(row), kc, vc);
      Eigen::RowVectorXd hn = ln_value(h.row(0), final_ln_);
      const Linear& head = (step == 0)   ? head_lat_
                           : (step == 1) ? head_lon_
                           : ((step % 2 == 0) ? head_x_ : head_y_);
      int idx = pick(hn * head.w->v + head.b->v.row(0));
      if (step == 0) fed.lat = idx;
      else if (step == 1) fed.lon = idx;
      else fed.bins[step - 2] = idx;
    }
    CoarsePlan plan;
    plan.command.lateral = static_cast<LateralPrimitive>(fed.lat);
    plan.command.longitudinal = static_cast<LongitudinalPrimitive>(fed.lon);
    plan.trajectory = decode_trajectory(fed.bins);
    plan.token_probs = probs;
    plan.conf = confidence(probs);
    return plan;
  }

  Trajectory decode_trajectory(const std::array<int, 16>& bins) const {
    Trajectory traj;
    traj.dt = cfg_.waypoint_dt;
    traj.horizon = cfg_.waypoint_dt * cfg_.n_waypoints;
    for (int i = 0; i < cfg_.n_waypoints; ++i) {
      int bx = bins[2 * i], by = bins[2 * i + 1];
      if (bx < 0 || bx >= cfg_.n_x_bins() || by < 0 || by >= cfg_.n_y_bins())
        throw InvalidInputError("decode_trajectory: bin index out of vocab");
      traj.waypoints.emplace_back(
          cfg_.x_min + (bx + 0.5) * cfg_.bin_width,
          cfg_.y_min + (by + 0.5) * cfg_.bin_width);
    }
    return traj;
  }

  std::array<int, 16> encode_trajectory(const Trajectory& traj) const {
    if (traj.size() != cfg_.n_waypoints)
      throw InvalidInputError("encode_trajectory: waypoint count mismatch");
    std::array<int, 16> bins{};
    for (int i = 0; i < cfg_.n_waypoints; ++i) {
      double x = std::clamp(traj.waypoints[i].x(), cfg_.x_min,
                            cfg_.x_max - 1e-9);
      double y = std::clamp(traj.waypoints[i].y(), cfg_.y_min,
                            cfg_.y_max - 1e-9);
      bins[2 * i] = static_cast<int>((x - cfg_.x_min) / cfg_.bin_width);
      bins[2 * i + 1] = static_cast<int>((y - cfg_.y_min) / cfg_.bin_width);
    }
    return bins;
  }

  // Joint teacher-forced training of the vision encoder, sparsifier mixing
  // layer and the transformer. Returns the per-epoch mean loss.
  std::vector<double> train(const std::vector<PolicySample>& dataset,
                            const CameraRig& rig,
                            const PolicyTrainConfig& tc) {
    if (dataset.empty())
      throw InvalidInputError("train_policy: empty dataset");
    Rng rng(tc.seed);
    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> history;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
      // Fisher-Yates with the deterministic generator.
      for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<int>(rng.uniform_int(i + 1))]);
      double epoch_loss = 0.0;
      int in_batch = 0;
      ps_.zero_grad();
      for (size_t oi = 0; oi < order.size(); ++oi) {
        const PolicySample& s = dataset[order[oi]];
        Tape t;
        TPtr scene = encode_scene_graph(t, s.inputs, rig);
        TPtr loss;
        ForwardResult r = forward_from(t, scene, build_prompt(s.history),
                                       &s.targets, &loss);
        if (!std::isfinite(r.loss))
          throw std::runtime_error(
              "train_policy: non-finite loss at epoch " +
              std::to_string(epoch));
        epoch_loss += r.loss;
        t.backward(loss);
        if (++in_batch == tc.batch_size || oi + 1 == order.size()) {
          ps_.sgd_step(tc.lr / in_batch);
          ps_.zero_grad();
          in_batch = 0;
        }
      }
      history.push_back(epoch_loss / static_cast<double>(dataset.size()));
    }
    return history;
  }

  void save(const std::string& path) const { save_checkpoint(path, ps_); }
  void load(const std::string& path) { load_checkpoint(path, ps_); }

 private:
  // Value-only layer math for the decoding fast path; mirrors the tape ops.
  static Eigen::RowVectorXd ln_value(const Eigen::RowVectorXd& x,
                                     const LayerNormParams& ln) {
    double m = x.mean();
    double var = (x.array() - m).square().mean();
    double inv = 1.0 / std::sqrt(var + 1e-5);
    return ((x.array() - m) * inv * ln.gain->v.row(0).array() +
            ln.bias->v.row(0).array())
        .matrix();
  }

  static MatXd gelu_value(const MatXd& x) {
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    auto a = x.array();
    return (0.5 * a * (1.0 + (c * (a + 0.044715 * a.cube())).tanh())).matrix();
  }

  // Runs rows x through the transformer stack, appending their keys/values
  // to the per-layer cache. Every row attends over the full cache after the
  // append, which is bidirectional for the prefix batch and causal for the
  // one-row decode steps.
  MatXd decode_blocks(MatXd x, std::vector<MatXd>& kc,
                      std::vector<MatXd>& vc) const {
    const int d = cfg_.d_model, nh = cfg_.n_heads, dh = d / nh;
    const int n = static_cast<int>(x.rows());
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const TransformerBlock& b = blocks_[l];
      MatXd xn(n, d);
      for (int i = 0; i < n; ++i) xn.row(i) = ln_value(x.row(i), b.ln1);
      MatXd q = (xn * b.attn.wq.w->v).rowwise() + b.attn.wq.b->v.row(0);
      MatXd k = (xn * b.attn.wk.w->v).rowwise() + b.attn.wk.b->v.row(0);
      MatXd v = (xn * b.attn.wv.w->v).rowwise() + b.attn.wv.b->v.row(0);
      const int old = static_cast<int>(kc[l].rows());
      kc[l].conservativeResize(old + n, d);
      vc[l].conservativeResize(old + n, d);
      kc[l].bottomRows(n) = k;
      vc[l].bottomRows(n) = v;
      MatXd attn_out(n, d);
      const double inv_s = 1.0 / std::sqrt(static_cast<double>(dh));
      for (int h = 0; h < nh; ++h) {
        auto kh = kc[l].middleCols(h * dh, dh);
        auto vh = vc[l].middleCols(h * dh, dh);
        for (int i = 0; i < n; ++i) {
          VecXd scores =
              (kh * q.row(i).segment(h * dh, dh).transpose()) * inv_s;
          VecXd e = (scores.array() - scores.maxCoeff()).exp();
          VecXd p = e / e.sum();
          attn_out.row(i).segment(h * dh, dh) = (p.transpose() * vh);
        }
      }
      x += (attn_out * b.attn.wo.w->v).rowwise() + b.attn.wo.b->v.row(0);
      MatXd hn(n, d);
      for (int i = 0; i < n; ++i) hn.row(i) = ln_value(x.row(i), b.ln2);
      MatXd f1 = gelu_value((hn * b.ff1.w->v).rowwise() + b.ff1.b->v.row(0));
      x += ((f1 * b.ff2.w->v).rowwise() + b.ff2.b->v.row(0));
    }
    return x;
  }

  PolicyConfig cfg_;
  ParamStore ps_;
  Linear patch_embed_, pos_enc1_, pos_enc2_;
  TransformerBlock vision_block_;
  TPtr fusion_mixing_, fusion_bias_;
  Linear scene_proj_, prompt_proj_;
  TPtr lat_emb_, lon_emb_, x_emb_, y_emb_, bos_emb_, pos_emb_;
  std::vector<TransformerBlock> blocks_;
  LayerNormParams final_ln_;
  Linear head_lat_, head_lon_, head_x_, head_y_;
};

}  // namespace hist
