// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "hist/nn.hpp"
#include "hist/rng.hpp"

using namespace hist;

namespace {

MatXd random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  MatXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

// Reduce any tensor to a scalar with fixed random weights so every output
// entry contributes to the gradient: sum_ij x_ij * w_ij, realized as the
// diagonal sum of x * w^T.
TPtr weighted_sum(Tape& t, const TPtr& x, const MatXd& w) {
  TPtr prod = t.matmul(x, t.constant(w), false, true);  // r x r
  TPtr acc;
  for (int i = 0; i < prod->v.rows(); ++i) {
    TPtr cell = t.slice_cols(t.slice_rows(prod, i, 1), i, 1);
    acc = acc ? t.add(acc, cell) : cell;
  }
  return acc;
}

// Central finite differences of a scalar-valued graph w.r.t. one parameter.
void check_grad(const std::function<double(const MatXd&)>& f, TPtr param,
                const MatXd& analytic, double eps = 1e-6, double tol = 1e-5) {
  for (int i = 0; i < param->v.rows(); ++i) {
    for (int j = 0; j < param->v.cols(); ++j) {
      MatXd plus = param->v, minus = param->v;
      plus(i, j) += eps;
      minus(i, j) -= eps;
      double fd = (f(plus) - f(minus)) / (2.0 * eps);
      double denom = std::max({std::abs(fd), std::abs(analytic(i, j)), 1e-4});
      CHECK(std::abs(fd - analytic(i, j)) / denom < tol);
    }
  }
}

}  // namespace

TEST_CASE("matmul gradients for all transpose combinations") {
  Rng rng(21);
  for (int ta = 0; ta < 2; ++ta) {
    for (int tb = 0; tb < 2; ++tb) {
      MatXd av = ta ? random_mat(5, 3, rng) : random_mat(3, 5, rng);
      MatXd bv = tb ? random_mat(4, 5, rng) : random_mat(5, 4, rng);
      MatXd w = random_mat(3, 4, rng);  // output is 3 x 4
      auto run = [&](const MatXd& a_in, const MatXd& b_in, TPtr* pa,
                     TPtr* pb) {
        Tape t;
        TPtr a = make_param(a_in);
        TPtr b = make_param(b_in);
        TPtr loss = weighted_sum(t, t.matmul(a, b, ta, tb), w);
        t.backward(loss);
        if (pa) *pa = a;
        if (pb) *pb = b;
        return loss->v(0, 0);
      };
      TPtr a, b;
      run(av, bv, &a, &b);
      check_grad([&](const MatXd& m) { return run(m, bv, nullptr, nullptr); },
                 a, a->g);
      check_grad([&](const MatXd& m) { return run(av, m, nullptr, nullptr); },
                 b, b->g);
    }
  }
}

TEST_CASE("elementwise and broadcast op gradients") {
  Rng rng(22);
  MatXd xv = random_mat(4, 6, rng);
  MatXd bv = random_mat(1, 6, rng);
  MatXd w = random_mat(4, 6, rng);
  auto run = [&](const MatXd& x_in, const MatXd& b_in, TPtr* px, TPtr* pb) {
    Tape t;
    TPtr x = make_param(x_in);
    TPtr b = make_param(b_in);
    TPtr y = t.add_rowvec(t.scale(t.tanh_act(x), 1.7), b);
    TPtr z = t.sub(t.gelu(y), t.scale(x, 0.3));
    TPtr loss = weighted_sum(t, z, w);
    t.backward(loss);
    if (px) *px = x;
    if (pb) *pb = b;
    return loss->v(0, 0);
  };
  TPtr x, b;
  run(xv, bv, &x, &b);
  check_grad([&](const MatXd& m) { return run(m, bv, nullptr, nullptr); }, x,
             x->g);
  check_grad([&](const MatXd& m) { return run(xv, m, nullptr, nullptr); }, b,
             b->g);
}

TEST_CASE("softmax gradient, with and without additive mask") {
  Rng rng(23);
  MatXd xv = random_mat(3, 5, rng);
  MatXd w = random_mat(3, 5, rng);
  MatXd mask = MatXd::Zero(3, 5);
  mask(0, 4) = -1e30;
  mask(2, 0) = -1e30;
  for (const MatXd* m : {static_cast<const MatXd*>(nullptr),
                         static_cast<const MatXd*>(&mask)}) {
    auto run = [&](const MatXd& x_in, TPtr* px) {
      Tape t;
      TPtr x = make_param(x_in);
      TPtr loss = weighted_sum(t, t.row_softmax(x, m), w);
      t.backward(loss);
      if (px) *px = x;
      return loss->v(0, 0);
    };
    TPtr x;
    run(xv, &x);
    check_grad([&](const MatXd& v) { return run(v, nullptr); }, x, x->g);
  }
}

TEST_CASE("layernorm gradients for input, gain and bias") {
  Rng rng(24);
  MatXd xv = random_mat(3, 8, rng);
  MatXd gv = random_mat(1, 8, rng, 0.5);
  MatXd bv = random_mat(1, 8, rng, 0.5);
  MatXd w = random_mat(3, 8, rng);
  auto run = [&](const MatXd& x_in, const MatXd& g_in, const MatXd& b_in,
                 TPtr* px, TPtr* pg, TPtr* pb) {
    Tape t;
    TPtr x = make_param(x_in);
    TPtr g = make_param(g_in);
    TPtr b = make_param(b_in);
    TPtr loss = weighted_sum(t, t.layernorm(x, g, b), w);
    t.backward(loss);
    if (px) *px = x;
    if (pg) *pg = g;
    if (pb) *pb = b;
    return loss->v(0, 0);
  };
  TPtr x, g, b;
  run(xv, gv, bv, &x, &g, &b);
  auto fx = [&](const MatXd& v) {
    return run(v, gv, bv, nullptr, nullptr, nullptr);
  };
  auto fg = [&](const MatXd& v) {
    return run(xv, v, bv, nullptr, nullptr, nullptr);
  };
  auto fb = [&](const MatXd& v) {
    return run(xv, gv, v, nullptr, nullptr, nullptr);
  };
  check_grad(fx, x, x->g);
  check_grad(fg, g, g->g);
  check_grad(fb, b, b->g);
}

TEST_CASE("slice, concat and gather route gradients to the right cells") {
  Rng rng(25);
  MatXd xv = random_mat(6, 6, rng);
  MatXd w = random_mat(5, 6, rng);
  std::vector<int> idx = {4, 0, 4};
  auto run = [&](const MatXd& x_in, TPtr* px) {
    Tape t;
    TPtr x = make_param(x_in);
    TPtr top = t.slice_rows(x, 0, 2);
    TPtr cols = t.slice_cols(x, 2, 3);  // 6 x 3
    TPtr gathered = t.gather_rows(x, idx);
    TPtr merged = t.concat_rows({top, gathered});            // 5 x 6
    TPtr wide = t.concat_cols({t.slice_rows(cols, 0, 5),
                               t.slice_rows(merged, 0, 5)});  // 5 x 9
    TPtr loss = weighted_sum(t, t.slice_cols(wide, 1, 6), w);
    t.backward(loss);
    if (px) *px = x;
    return loss->v(0, 0);
  };
  TPtr x;
  run(xv, &x);
  check_grad([&](const MatXd& v) { return run(v, nullptr); }, x, x->g);
}

TEST_CASE("cross entropy matches the log-softmax value and gradient") {
  Rng rng(26);
  MatXd logits = random_mat(4, 7, rng);
  std::vector<int> targets = {2, 0, 6, 3};
  Tape t;
  TPtr x = make_param(logits);
  TPtr loss = t.cross_entropy(x, targets);
  // Value oracle: mean negative log softmax probability.
  double expect = 0.0;
  for (int i = 0; i < 4; ++i) {
    double mx = logits.row(i).maxCoeff();
    double lse = std::log((logits.row(i).array() - mx).exp().sum()) + mx;
    expect += lse - logits(i, targets[i]);
  }
  CHECK(loss->v(0, 0) == doctest::Approx(expect / 4.0).epsilon(1e-12));
  t.backward(loss);
  auto f = [&](const MatXd& v) {
    Tape t2;
    return t2.cross_entropy(make_param(v), targets)->v(0, 0);
  };
  check_grad(f, x, x->g);
}

TEST_CASE("l1 loss and closed-form KL gradients") {
  Rng rng(27);
  MatXd xv = random_mat(2, 6, rng);
  MatXd target = random_mat(2, 6, rng);
  // Keep entries away from the |.| kink.
  for (int i = 0; i < xv.size(); ++i)
    if (std::abs(xv(i) - target(i)) < 0.1) xv(i) += 0.3;
  {
    Tape t;
    TPtr x = make_param(xv);
    TPtr loss = t.l1_loss(x, target);
    CHECK(loss->v(0, 0) ==
          doctest::Approx((xv - target).cwiseAbs().sum() / 12.0));
    t.backward(loss);
    auto f = [&](const MatXd& v) {
      Tape t2;
      return t2.l1_loss(make_param(v), target)->v(0, 0);
    };
    check_grad(f, x, x->g);
  }
  {
    MatXd mu = random_mat(1, 5, rng);
    Tape t;
    TPtr m = make_param(mu);
    TPtr loss = t.kl_gauss(m, 0.7);
    double expect =
        0.5 * (5.0 * (0.7 - 1.0 - std::log(0.7)) + mu.squaredNorm());
    CHECK(loss->v(0, 0) == doctest::Approx(expect).epsilon(1e-12));
    t.backward(loss);
    auto f = [&](const MatXd& v) {
      Tape t2;
      return t2.kl_gauss(make_param(v), 0.7)->v(0, 0);
    };
    check_grad(f, m, m->g);
    CHECK_THROWS_AS(t.kl_gauss(m, 0.0), InvalidInputError);
  }
}

TEST_CASE("gradients accumulate across reuse of the same tensor") {
  // loss = sum(x) + sum(x) should give gradient 2 everywhere.
  Tape t;
  TPtr x = make_param(MatXd::Ones(2, 3));
  TPtr doubled = t.add(x, x);
  TPtr loss = weighted_sum(t, doubled, MatXd::Ones(2, 3));
  t.backward(loss);
  CHECK((x->g.array() == 2.0).all());
}

TEST_CASE("transformer block backward matches finite differences") {
  Rng rng(28);
  ParamStore ps;
  TransformerBlock block;
  block.init(ps, "blk", 8, 2, 16, rng);
  MatXd xv = random_mat(5, 8, rng, 0.5);
  MatXd w = random_mat(5, 8, rng);
  MatXd mask = prefix_causal_mask(5, 2);
  auto run = [&]() {
    ps.zero_grad();
    Tape t;
    TPtr loss = weighted_sum(t, block.forward(t, t.constant(xv), &mask), w);
    t.backward(loss);
    return loss->v(0, 0);
  };
  run();
  // Spot-check a handful of parameters against finite differences.
  const char* names[] = {"blk.attn.q.w", "blk.attn.o.b", "blk.ff1.w",
                         "blk.ln1.gain", "blk.ln2.bias"};
  Rng pick(29);
  for (const char* name : names) {
    TPtr p = ps.get(name);
    MatXd analytic = p->g;
    for (int probe = 0; probe < 4; ++probe) {
      int i = static_cast<int>(pick.uniform_int(p->v.rows()));
      int j = static_cast<int>(pick.uniform_int(p->v.cols()));
      double keep = p->v(i, j);
      double eps = 1e-6;
      p->v(i, j) = keep + eps;
      double hi = run();
      p->v(i, j) = keep - eps;
      double lo = run();
      p->v(i, j) = keep;
      double fd = (hi - lo) / (2.0 * eps);
      double denom = std::max({std::abs(fd), std::abs(analytic(i, j)), 1e-4});
      CHECK(std::abs(fd - analytic(i, j)) / denom < 2e-4);
    }
  }
}
