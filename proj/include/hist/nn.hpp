// SPDX-License-Identifier: Apache-2.0
//
// Small neural-net layer toolkit on top of the autodiff tape: parameter
// registry, linear layers, pre-LN transformer blocks with configurable
// attention masks, and plain SGD.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "hist/autograd.hpp"
#include "hist/rng.hpp"

namespace hist {

// Named parameter store shared by models and the checkpoint format.
class ParamStore {
 public:
  TPtr create(const std::string& name, int rows, int cols, Rng& rng,
              double scale) {
    MatXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
    return insert(name, std::move(m));
  }

  TPtr create_zero(const std::string& name, int rows, int cols) {
    return insert(name, MatXd::Zero(rows, cols));
  }

  TPtr create_value(const std::string& name, MatXd m) {
    return insert(name, std::move(m));
  }

  TPtr get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end())
      throw InvalidConfigError("unknown parameter: " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return params_.count(name) > 0; }

  const std::map<std::string, TPtr>& all() const { return params_; }

  long long total_size() const {
    long long n = 0;
    for (const auto& [k, p] : params_) n += p->v.size();
    return n;
  }

  void zero_grad() {
    for (auto& [k, p] : params_) p->zero_grad();
  }

  void sgd_step(double lr) {
    for (auto& [k, p] : params_) p->v -= lr * p->g;
  }

 private:
  TPtr insert(const std::string& name, MatXd m) {
    if (params_.count(name))
      throw InvalidConfigError("duplicate parameter: " + name);
    TPtr t = make_param(std::move(m));
    params_[name] = t;
    return t;
  }

  std::map<std::string, TPtr> params_;
};

struct Linear {
  TPtr w, b;

  void init(ParamStore& ps, const std::string& name, int in, int out,
            Rng& rng, double scale = -1.0) {
    if (scale < 0) scale = 1.0 / std::sqrt(static_cast<double>(in));
    w = ps.create(name + ".w", in, out, rng, scale);
    b = ps.create_zero(name + ".b", 1, out);
  }

  void init_zero(ParamStore& ps, const std::string& name, int in, int out) {
    w = ps.create_zero(name + ".w", in, out);
    b = ps.create_zero(name + ".b", 1, out);
  }

  TPtr forward(Tape& t, const TPtr& x) const {
    return t.add_rowvec(t.matmul(x, w), b);
  }
};

struct LayerNormParams {
  TPtr gain, bias;

  void init(ParamStore& ps, const std::string& name, int d) {
    gain = ps.create_value(name + ".gain", MatXd::Ones(1, d));
    bias = ps.create_zero(name + ".bias", 1, d);
  }

  TPtr forward(Tape& t, const TPtr& x) const {
    return t.layernorm(x, gain, bias);
  }
};

// Multi-head attention over a single sequence (self) or a pair (cross).
// Returns the attended values; optionally exposes the head-averaged
// attention probabilities of the forward pass.
struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  int n_heads = 1;
  int d_model = 0;

  void init(ParamStore& ps, const std::string& name, int d, int heads,
            Rng& rng, int d_kv = -1, bool zero_output = false) {
    if (d % heads != 0)
      throw InvalidConfigError("attention: d_model must divide by heads");
    d_model = d;
    n_heads = heads;
    if (d_kv < 0) d_kv = d;
    wq.init(ps, name + ".q", d, d, rng);
    wk.init(ps, name + ".k", d_kv, d, rng);
    wv.init(ps, name + ".v", d_kv, d, rng);
    if (zero_output)
      wo.init_zero(ps, name + ".o", d, d);
    else
      wo.init(ps, name + ".o", d, d, rng);
  }

  TPtr forward(Tape& t, const TPtr& query_in, const TPtr& kv_in,
               const MatXd* additive_mask = nullptr,
               MatXd* attn_probs_out = nullptr) const {
    const int dh = d_model / n_heads;
    TPtr q = wq.forward(t, query_in);
    TPtr k = wk.forward(t, kv_in);
    TPtr v = wv.forward(t, kv_in);
    std::vector<TPtr> heads;
    if (attn_probs_out)
      attn_probs_out->setZero(query_in->v.rows(), kv_in->v.rows());
    for (int h = 0; h < n_heads; ++h) {
      TPtr qh = t.slice_cols(q, h * dh, dh);
      TPtr kh = t.slice_cols(k, h * dh, dh);
      TPtr vh = t.slice_cols(v, h * dh, dh);
      TPtr scores =
          t.scale(t.matmul(qh, kh, false, true), 1.0 / std::sqrt((double)dh));
      TPtr probs = t.row_softmax(scores, additive_mask);
      if (attn_probs_out) *attn_probs_out += probs->v / n_heads;
      heads.push_back(t.matmul(probs, vh));
    }
    return wo.forward(t, t.concat_cols(heads));
  }
};

// Pre-LN transformer block: x + MHA(LN(x)), then x + FFW(LN(x)).
struct TransformerBlock {
  MultiHeadAttention attn;
  Linear ff1, ff2;
  LayerNormParams ln1, ln2;

  void init(ParamStore& ps, const std::string& name, int d, int heads,
            int d_ff, Rng& rng) {
    attn.init(ps, name + ".attn", d, heads, rng);
    ff1.init(ps, name + ".ff1", d, d_ff, rng);
    ff2.init(ps, name + ".ff2", d_ff, d, rng);
    ln1.init(ps, name + ".ln1", d);
    ln2.init(ps, name + ".ln2", d);
  }

  TPtr forward(Tape& t, const TPtr& x, const MatXd* mask = nullptr,
               MatXd* attn_probs_out = nullptr) const {
    TPtr xn = ln1.forward(t, x);
    TPtr h = t.add(x, attn.forward(t, xn, xn, mask, attn_probs_out));
    TPtr f = ff2.forward(t, t.gelu(ff1.forward(t, ln2.forward(t, h))));
    return t.add(h, f);
  }
};

// Prefix-LM mask: the first prefix_len positions see each other fully;
// later positions see the prefix plus everything up to themselves.
inline MatXd prefix_causal_mask(int seq_len, int prefix_len) {
  MatXd m = MatXd::Zero(seq_len, seq_len);
  constexpr double neg = -1e30;
  for (int i = 0; i < seq_len; ++i)
    for (int j = 0; j < seq_len; ++j)
      if (!(j < prefix_len || j <= i)) m(i, j) = neg;
  return m;
}

}  // namespace hist
