// SPDX-License-Identifier: Apache-2.0
//
// Dynamic token sparsification: salience-ranked top-k retention with
// self-similarity guided fusion of the pruned tokens into the kept ones,
// plus the transformer cost model used for compute accounting.
#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "hist/common.hpp"

namespace hist {

struct TokenSet {
  MatXd tokens;                 // N x d_model
  std::vector<Vec3> positions;  // parallel, ego frame
  VecXd salience;               // parallel, >= 0

  int count() const { return static_cast<int>(tokens.rows()); }

  void validate() const {
    if (static_cast<int>(positions.size()) != count() ||
        salience.size() != count())
      throw InvalidInputError("token set: parallel lists differ in length");
    if (!tokens.allFinite() || !salience.allFinite() ||
        (salience.array() < 0.0).any())
      throw InvalidInputError("token set: non-finite or negative entries");
  }
};

struct SparsifierConfig {
  double fusion_rate = 0.8;  // fraction of tokens kept
  double temperature = 1.0;  // softness of the similarity assignment

  void validate() const {
    if (!(fusion_rate > 0.0 && fusion_rate <= 1.0))
      throw InvalidConfigError("sparsifier: fusion_rate must be in (0,1]");
    if (!(temperature > 0.0))
      throw InvalidConfigError("sparsifier: temperature must be > 0");
  }
};

// Learnable linear mixing applied to fused tokens; identity at init so that
// fusion starts as a pure weighted average.
struct FusionLayer {
  MatXd mixing;
  VecXd bias;

  explicit FusionLayer(int d = 0) { init(d); }

  void init(int d) {
    mixing = MatXd::Identity(d, d);
    bias = VecXd::Zero(d);
  }
};

// Mean attention received per token (column mean of a row-stochastic matrix).
inline VecXd salience_scores(const TokenSet& tokens, const MatXd& attention) {
  tokens.validate();
  const int n = tokens.count();
  if (attention.rows() != n || attention.cols() != n)
    throw InvalidInputError("salience_scores: attention size mismatch");
  for (int i = 0; i < n; ++i)
    if (std::abs(attention.row(i).sum() - 1.0) > 1e-6)
      throw InvalidInputError("salience_scores: attention rows must sum to 1");
  return attention.colwise().mean().transpose();
}

// Top-k partition by score, ties broken by lower index. |kept| = ceil(N*rate).
inline std::pair<std::vector<int>, std::vector<int>> partition_topk(
    const VecXd& scores, double fusion_rate) {
  if (!(fusion_rate > 0.0 && fusion_rate <= 1.0))
    throw InvalidConfigError("partition_topk: fusion_rate must be in (0,1]");
  const int n = static_cast<int>(scores.size());
  if (n == 0) throw InvalidInputError("partition_topk: empty token set");
  const int k = static_cast<int>(
      std::ceil(static_cast<double>(n) * fusion_rate - 1e-12));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  std::vector<int> kept(order.begin(), order.begin() + k);
  std::vector<int> pruned(order.begin() + k, order.end());
  std::sort(kept.begin(), kept.end());
  std::sort(pruned.begin(), pruned.end());
  return {kept, pruned};
}

// Soft assignment of each pruned token over the kept ones. Row p holds
// softmax(cos(pruned_p, kept)/temperature); zero-norm tokens get similarity
// 0 against every kept token.
inline MatXd fusion_assignment(const MatXd& tokens,
                               const std::vector<int>& kept,
                               const std::vector<int>& pruned,
                               double temperature) {
  MatXd w(pruned.size(), kept.size());
  for (size_t pi = 0; pi < pruned.size(); ++pi) {
    VecXd p = tokens.row(pruned[pi]).transpose();
    double pn = p.norm();
    VecXd sims(kept.size());
    for (size_t ki = 0; ki < kept.size(); ++ki) {
      VecXd q = tokens.row(kept[ki]).transpose();
      double qn = q.norm();
      sims[ki] = (pn < 1e-12 || qn < 1e-12) ? 0.0 : p.dot(q) / (pn * qn);
    }
    VecXd e = ((sims.array() - sims.maxCoeff()) / temperature).exp();
    w.row(pi) = (e / e.sum()).transpose();
  }
  return w;
}

// Averaging matrix W (|kept| x N) such that W * tokens yields the
// salience-weighted average of each kept token with its softly assigned
// pruned tokens. Kept rows with no weight mass fall back to the kept token.
inline MatXd fusion_average_matrix(const MatXd& tokens, const VecXd& salience,
                                   const std::vector<int>& kept,
                                   const std::vector<int>& pruned,
                                   double temperature) {
  MatXd w = pruned.empty()
                ? MatXd(0, kept.size())
                : fusion_assignment(tokens, kept, pruned, temperature);
  MatXd avg = MatXd::Zero(kept.size(), tokens.rows());
  for (size_t ki = 0; ki < kept.size(); ++ki) {
    double wsum = salience[kept[ki]];
    avg(ki, kept[ki]) = wsum;
    for (size_t pi = 0; pi < pruned.size(); ++pi) {
      double c = w(pi, ki) * salience[pruned[pi]];
      avg(ki, pruned[pi]) += c;
      wsum += c;
    }
    if (wsum > 1e-12) {
      avg.row(ki) /= wsum;
    } else {
      avg.row(ki).setZero();
      avg(ki, kept[ki]) = 1.0;
    }
  }
  return avg;
}

// Each kept token becomes the salience-weighted average of itself and its
// softly assigned pruned tokens, then passes through the mixing layer.
inline TokenSet fuse_pruned(const TokenSet& in, const std::vector<int>& kept,
                            const std::vector<int>& pruned,
                            double temperature, const FusionLayer& layer) {
  in.validate();
  if (kept.empty()) throw InvalidInputError("fuse_pruned: no kept tokens");
  MatXd avg_mat = fusion_average_matrix(in.tokens, in.salience, kept, pruned,
                                        temperature);
  TokenSet out;
  out.tokens = (avg_mat * in.tokens) * layer.mixing.transpose();
  out.tokens.rowwise() += layer.bias.transpose();
  out.positions.resize(kept.size());
  out.salience.resize(kept.size());
  for (size_t ki = 0; ki < kept.size(); ++ki) {
    out.positions[ki] = in.positions[kept[ki]];
    out.salience[ki] = in.salience[kept[ki]];
  }
  return out;
}

// Convenience wrapper: score -> partition -> fuse.
inline TokenSet sparsify(const TokenSet& in, const MatXd& attention,
                         const SparsifierConfig& cfg,
                         const FusionLayer& layer) {
  cfg.validate();
  VecXd scores = salience_scores(in, attention);
  TokenSet scored = in;
  scored.salience = scores;
  auto [kept, pruned] = partition_topk(scores, cfg.fusion_rate);
  return fuse_pruned(scored, kept, pruned, cfg.temperature, layer);
}

// Standard transformer cost model: per layer, attention = 4*N*d^2 + 2*N^2*d
// and feed-forward = 8*N*d^2.
inline double flops_estimate(long long seq_len, long long d_model,
                             long long n_layers, long long n_heads) {
  if (seq_len < 1 || d_model < 1 || n_layers < 1 || n_heads < 1)
    throw InvalidInputError("flops_estimate: all arguments must be >= 1");
  double n = static_cast<double>(seq_len);
  double d = static_cast<double>(d_model);
  double attn = 4.0 * n * d * d + 2.0 * n * n * d;
  double ffw = 8.0 * n * d * d;
  return static_cast<double>(n_layers) * (attn + ffw);
}

}  // namespace hist
