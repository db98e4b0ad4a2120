// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode autodiff over Eigen matrices. A Tape records the
// forward ops; backward() replays them in reverse, accumulating gradients
// into each tensor's .g. Parameters are long-lived tensors owned by models;
// intermediates live as long as the tape.
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "hist/common.hpp"

namespace hist {

struct Tensor {
  MatXd v;  // value
  MatXd g;  // gradient, same shape
  bool needs_grad = false;

  Tensor() = default;
  Tensor(MatXd value, bool grad) : v(std::move(value)), needs_grad(grad) {
    // Gradient storage only for tensors that participate in backward.
    if (grad) g = MatXd::Zero(v.rows(), v.cols());
  }

  void zero_grad() { g.setZero(); }
};

using TPtr = std::shared_ptr<Tensor>;

inline TPtr make_param(MatXd v) {
  return std::make_shared<Tensor>(std::move(v), true);
}

inline TPtr make_const(MatXd v) {
  return std::make_shared<Tensor>(std::move(v), false);
}

class Tape {
 public:
  TPtr constant(MatXd v) { return make_const(std::move(v)); }

  // General matrix product with optional operand transposes.
  TPtr matmul(const TPtr& a, const TPtr& b, bool ta = false, bool tb = false) {
    MatXd v(ta ? a->v.cols() : a->v.rows(), tb ? b->v.rows() : b->v.cols());
    if (!ta && !tb) v.noalias() = a->v * b->v;
    else if (ta && !tb) v.noalias() = a->v.transpose() * b->v;
    else if (!ta && tb) v.noalias() = a->v * b->v.transpose();
    else v.noalias() = a->v.transpose() * b->v.transpose();
    TPtr out = node(std::move(v), a->needs_grad || b->needs_grad);
    record([=] {
      if (a->needs_grad) {
        if (!ta && !tb) a->g.noalias() += out->g * b->v.transpose();
        else if (!ta && tb) a->g.noalias() += out->g * b->v;
        else if (ta && !tb) a->g.noalias() += b->v * out->g.transpose();
        else a->g.noalias() += b->v.transpose() * out->g.transpose();
      }
      if (b->needs_grad) {
        if (!ta && !tb) b->g.noalias() += a->v.transpose() * out->g;
        else if (ta && !tb) b->g.noalias() += a->v * out->g;
        else if (!ta && tb) b->g.noalias() += out->g.transpose() * a->v;
        else b->g.noalias() += out->g.transpose() * a->v.transpose();
      }
    });
    return out;
  }

  TPtr add(const TPtr& a, const TPtr& b) {
    TPtr out = node(a->v + b->v, a->needs_grad || b->needs_grad);
    record([=] {
      if (a->needs_grad) a->g += out->g;
      if (b->needs_grad) b->g += out->g;
    });
    return out;
  }

  TPtr sub(const TPtr& a, const TPtr& b) {
    TPtr out = node(a->v - b->v, a->needs_grad || b->needs_grad);
    record([=] {
      if (a->needs_grad) a->g += out->g;
      if (b->needs_grad) b->g -= out->g;
    });
    return out;
  }

  // Broadcast-add a 1 x d row vector to every row.
  TPtr add_rowvec(const TPtr& a, const TPtr& b) {
    TPtr out = node(a->v.rowwise() + b->v.row(0),
                    a->needs_grad || b->needs_grad);
    record([=] {
      if (a->needs_grad) a->g += out->g;
      if (b->needs_grad) b->g.row(0) += out->g.colwise().sum();
    });
    return out;
  }

  TPtr scale(const TPtr& a, double c) {
    TPtr out = node(a->v * c, a->needs_grad);
    record([=] {
      if (a->needs_grad) a->g += out->g * c;
    });
    return out;
  }

  // Row-wise softmax of (a + additive_mask); mask entries are 0 or -inf-ish.
  TPtr row_softmax(const TPtr& a, const MatXd* additive_mask = nullptr) {
    MatXd z = a->v;
    if (additive_mask) z += *additive_mask;
    MatXd y(z.rows(), z.cols());
    for (int i = 0; i < z.rows(); ++i) {
      Eigen::RowVectorXd e =
          (z.row(i).array() - z.row(i).maxCoeff()).exp();
      y.row(i) = e / e.sum();
    }
    TPtr out = node(std::move(y), a->needs_grad);
    record([=] {
      if (!a->needs_grad) return;
      for (int i = 0; i < out->v.rows(); ++i) {
        double dot = out->g.row(i).dot(out->v.row(i));
        a->g.row(i) += ((out->g.row(i).array() - dot) *
                        out->v.row(i).array()).matrix();
      }
    });
    return out;
  }

  // Row-wise layer normalization with learnable gain/bias (1 x d each).
  TPtr layernorm(const TPtr& a, const TPtr& gain, const TPtr& bias,
                 double eps = 1e-5) {
    const int n = static_cast<int>(a->v.rows());
    const int d = static_cast<int>(a->v.cols());
    MatXd xhat(n, d);
    VecXd inv_std(n);
    for (int i = 0; i < n; ++i) {
      double m = a->v.row(i).mean();
      double var = (a->v.row(i).array() - m).square().mean();
      inv_std[i] = 1.0 / std::sqrt(var + eps);
      xhat.row(i) = (a->v.row(i).array() - m) * inv_std[i];
    }
    MatXd y = ((xhat.array().rowwise() * gain->v.row(0).array()).rowwise() +
               bias->v.row(0).array())
                  .matrix();
    TPtr out = node(std::move(y), true);
    MatXd xh = xhat;  // captured copy
    record([=] {
      if (gain->needs_grad)
        gain->g.row(0) +=
            (out->g.array() * xh.array()).colwise().sum().matrix();
      if (bias->needs_grad) bias->g.row(0) += out->g.colwise().sum();
      if (a->needs_grad) {
        for (int i = 0; i < xh.rows(); ++i) {
          Eigen::ArrayXXd dxhat =
              out->g.row(i).array() * gain->v.row(0).array();
          double s1 = dxhat.sum();
          double s2 = (dxhat * xh.row(i).array()).sum();
          a->g.row(i).array() +=
              inv_std[i] *
              (dxhat - s1 / d - xh.row(i).array() * (s2 / d));
        }
      }
    });
    return out;
  }

  TPtr tanh_act(const TPtr& a) {
    TPtr out = node(a->v.array().tanh().matrix(), a->needs_grad);
    record([=] {
      if (a->needs_grad)
        a->g.array() += out->g.array() * (1.0 - out->v.array().square());
    });
    return out;
  }

  // GELU, tanh approximation (smooth, so finite-difference checks behave).
  TPtr gelu(const TPtr& a) {
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    auto x = a->v.array();
    Eigen::ArrayXXd inner = c * (x + 0.044715 * x.cube());
    Eigen::ArrayXXd t = inner.tanh();
    TPtr out = node((0.5 * x * (1.0 + t)).matrix(), a->needs_grad);
    Eigen::ArrayXXd dt = (1.0 - t.square()) * c * (1.0 + 3 * 0.044715 * x.square());
    record([=] {
      if (a->needs_grad)
        a->g.array() +=
            out->g.array() * (0.5 * (1.0 + t) + 0.5 * a->v.array() * dt);
    });
    return out;
  }

  TPtr slice_cols(const TPtr& a, int start, int n) {
    TPtr out = node(a->v.middleCols(start, n), a->needs_grad);
    record([=] {
      if (a->needs_grad) a->g.middleCols(start, n) += out->g;
    });
    return out;
  }

  TPtr slice_rows(const TPtr& a, int start, int n) {
    TPtr out = node(a->v.middleRows(start, n), a->needs_grad);
    record([=] {
      if (a->needs_grad) a->g.middleRows(start, n) += out->g;
    });
    return out;
  }

  TPtr concat_cols(const std::vector<TPtr>& parts) {
    int rows = static_cast<int>(parts[0]->v.rows());
    int cols = 0;
    bool grad = false;
    for (const auto& p : parts) {
      cols += static_cast<int>(p->v.cols());
      grad = grad || p->needs_grad;
    }
    MatXd v(rows, cols);
    int at = 0;
    for (const auto& p : parts) {
      v.middleCols(at, p->v.cols()) = p->v;
      at += static_cast<int>(p->v.cols());
    }
    TPtr out = node(std::move(v), grad);
    record([=] {
      int pos = 0;
      for (const auto& p : parts) {
        if (p->needs_grad)
          p->g += out->g.middleCols(pos, p->v.cols());
        pos += static_cast<int>(p->v.cols());
      }
    });
    return out;
  }

  TPtr concat_rows(const std::vector<TPtr>& parts) {
    int cols = static_cast<int>(parts[0]->v.cols());
    int rows = 0;
    bool grad = false;
    for (const auto& p : parts) {
      rows += static_cast<int>(p->v.rows());
      grad = grad || p->needs_grad;
    }
    MatXd v(rows, cols);
    int at = 0;
    for (const auto& p : parts) {
      v.middleRows(at, p->v.rows()) = p->v;
      at += static_cast<int>(p->v.rows());
    }
    TPtr out = node(std::move(v), grad);
    record([=] {
      int pos = 0;
      for (const auto& p : parts) {
        if (p->needs_grad)
          p->g += out->g.middleRows(pos, p->v.rows());
        pos += static_cast<int>(p->v.rows());
      }
    });
    return out;
  }

  // Embedding lookup: out row i = table row idx[i].
  TPtr gather_rows(const TPtr& table, const std::vector<int>& idx) {
    MatXd v(idx.size(), table->v.cols());
    for (size_t i = 0; i < idx.size(); ++i) v.row(i) = table->v.row(idx[i]);
    TPtr out = node(std::move(v), table->needs_grad);
    record([=] {
      if (table->needs_grad)
        for (size_t i = 0; i < idx.size(); ++i)
          table->g.row(idx[i]) += out->g.row(i);
    });
    return out;
  }

  // Mean cross-entropy of row-wise logits against integer targets. Returns a
  // 1x1 scalar tensor.
  TPtr cross_entropy(const TPtr& logits, const std::vector<int>& targets) {
    const int n = static_cast<int>(logits->v.rows());
    if (static_cast<int>(targets.size()) != n)
      throw InvalidInputError("cross_entropy: target count mismatch");
    MatXd probs(n, logits->v.cols());
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::RowVectorXd e =
          (logits->v.row(i).array() - logits->v.row(i).maxCoeff()).exp();
      probs.row(i) = e / e.sum();
      loss -= std::log(std::max(probs(i, targets[i]), 1e-300));
    }
    TPtr out = node(MatXd::Constant(1, 1, loss / n), logits->needs_grad);
    record([=] {
      if (!logits->needs_grad) return;
      double s = out->g(0, 0) / n;
      MatXd d = probs;
      for (int i = 0; i < d.rows(); ++i) d(i, targets[i]) -= 1.0;
      logits->g += s * d;
    });
    return out;
  }

  // Mean absolute deviation from a constant target (same shape).
  TPtr l1_loss(const TPtr& a, const MatXd& target) {
    double n = static_cast<double>(a->v.size());
    double loss = (a->v - target).array().abs().sum() / n;
    TPtr out = node(MatXd::Constant(1, 1, loss), a->needs_grad);
    record([=] {
      if (a->needs_grad)
        a->g.array() +=
            out->g(0, 0) / n * (a->v - target).array().sign();
    });
    return out;
  }

  // Closed-form KL(N(mu, sigma2*I) || N(0, I)) with scalar shared variance;
  // sigma2 is treated as a constant here.
  TPtr kl_gauss(const TPtr& mu, double sigma2) {
    if (!(sigma2 > 0.0))
      throw InvalidInputError("kl_gauss: sigma2 must be > 0");
    double d = static_cast<double>(mu->v.size());
    double kl = 0.5 * (d * (sigma2 - 1.0 - std::log(sigma2)) +
                       mu->v.array().square().sum());
    TPtr out = node(MatXd::Constant(1, 1, kl), mu->needs_grad);
    record([=] {
      if (mu->needs_grad) mu->g += out->g(0, 0) * mu->v;
    });
    return out;
  }

  void backward(const TPtr& loss) {
    if (loss->v.size() != 1)
      throw InvalidInputError("backward: loss must be a scalar");
    loss->g.setConstant(1.0);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

 private:
  TPtr node(MatXd v, bool grad) {
    auto t = std::make_shared<Tensor>(std::move(v), grad);
    nodes_.push_back(t);
    return t;
  }

  void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

  std::vector<TPtr> nodes_;
  std::vector<std::function<void()>> ops_;
};

}  // namespace hist
