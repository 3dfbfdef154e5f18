#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "gradcheck.hpp"
#include "graph/scenario.hpp"
#include "nn/adam.hpp"
#include "nn/distributions.hpp"
#include "nn/layers.hpp"

namespace decor::nn {
namespace {

using testing::grad_check;

Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = scale * (2.0 * uniform01(rng) - 1.0);
  return m;
}

GraphInput ring_graph(int n, int fe, Rng& rng) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    edges.emplace_back(i, (i + 1) % n);
    edges.emplace_back((i + 1) % n, i);
  }
  if (n > 3) edges.emplace_back(0, n / 2);
  return make_graph_input(random_mat(n, 2, rng), edges,
                          random_mat(static_cast<int>(edges.size()), fe, rng));
}

TEST_CASE("dense layer basics") {
  Rng rng(1);
  ParamStore ps;
  Dense d(ps, "d", 3, 3, false, rng, 0.0);
  Tape t;
  Mat x = random_mat(2, 3, rng);
  CHECK(d.forward(t, t.constant(x)).value().isZero());
  d.w->value = Mat::Identity(3, 3);
  Tape t2;
  CHECK(d.forward(t2, t2.constant(x)).value() == x);
}

TEST_CASE("dense and mlp gradients") {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(100 + trial);
    ParamStore ps;
    Mlp mlp(ps, "m", 4, {6, 5}, 3, rng);
    const Mat x = random_mat(3, 4, rng);
    auto r = grad_check(ps.all(), [&](Tape& t) { return sum(mlp.forward(t, t.constant(x))); });
    CHECK(r.rel_error < 1e-4);
    CHECK(r.analytic_norm > 0.0);
  }
}

TEST_CASE("elementwise op gradients") {
  Rng rng(7);
  ParamStore ps;
  Parameter& a = ps.add("a", 3, 4, rng);
  Parameter& b = ps.add("b", 3, 4, rng);
  Parameter& row = ps.add("row", 1, 4, rng);
  Parameter& col = ps.add("col", 3, 1, rng);
  const std::vector<int> idx{2, 0, 1, 2, -1};
  auto r = grad_check(ps.all(), [&](Tape& t) {
    Var va = t.param(a), vb = t.param(b);
    Var x = add(mul(tanh(va), sigmoid(vb)), softplus(sub(va, vb)));
    x = mul_col(mul_row(x, t.param(row)), t.param(col));
    x = add(x, exp(scale(square(vb), -0.5)));
    x = add(x, log(add_scalar(square(va), 1.0)));
    x = add(x, minimum(va, vb));
    Var g = gather_rows(x, idx);
    Var s = scatter_add_rows(g, {0, 1, 1, 2, 0}, 3);
    Var lsm = log_softmax_rows(s);
    Var p = pick(lsm, {0, 3, 1});
    return add(add(sum(p), sum(logsumexp_rows(s))),
               add(logsumexp(flatten(s)), sum(reshape_rows(flatten(col_sum(s)), 2))));
  });
  CHECK(r.rel_error < 1e-4);
}

TEST_CASE("gat layer attention properties") {
  Rng rng(3);
  ParamStore ps;
  GatLayer gat(ps, "g", 2, 2, 8, 4, rng);
  // single node: self loop only, weight 1
  GraphInput one = make_graph_input(random_mat(1, 2, rng), {}, Mat::Zero(0, 2));
  Tape t;
  Mat alpha;
  Var out = gat.forward(t, t.constant(one.node_features), one, &alpha);
  CHECK(alpha.rows() == 1);
  for (Eigen::Index h = 0; h < alpha.cols(); ++h) CHECK(alpha(0, h) == doctest::Approx(1.0));
  Mat expected = one.node_features * gat.w_src->value + gat.bias->value;
  CHECK((out.value() - expected).norm() < 1e-12);

  // two identical neighbours into a centre node
  ParamStore ps2;
  GatLayer g2(ps2, "g", 2, 2, 1, 4, rng);
  Mat nf(3, 2);
  nf << 0.1, 0.2, 0.5, 0.5, 0.5, 0.5;
  Mat ef = Mat::Constant(2, 2, 0.3);
  GraphInput star = make_graph_input(nf, {{1, 0}, {2, 0}}, ef);
  Tape t2;
  Mat a2;
  g2.forward(t2, t2.constant(star.node_features), star, &a2);
  CHECK(a2(0, 0) == doctest::Approx(a2(1, 0)));
  // incoming weights of node 0 sum to 1
  double s = 0.0;
  for (std::size_t e = 0; e < star.dst.size(); ++e)
    if (star.dst[e] == 0) s += a2(static_cast<Eigen::Index>(e), 0);
  CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("gat layer gradients on 5-node graphs") {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(500 + trial);
    ParamStore ps;
    GatLayer gat(ps, "g", 2, 2, 2 + trial % 3, 3, rng);
    GraphInput g = ring_graph(5, 2, rng);
    Parameter& x = ps.add("x", 5, 2, rng);
    const Mat w = random_mat(5, gat.heads * gat.dim, rng);
    auto r = grad_check(ps.all(), [&](Tape& t) {
      return sum(mul(tanh(gat.forward(t, t.param(x), g)), t.constant(w)));
    });
    CHECK(r.rel_error < 1e-4);
  }
}

TEST_CASE("sort pool contract") {
  Rng rng(4);
  Mat emb = random_mat(2, 3, rng);
  Tape t;
  Var p = sort_pool(t.constant(emb), 32);
  CHECK(p.cols() == 32 * 3);
  CHECK(p.value().rightCols(30 * 3).isZero());
  const int top = emb.rowwise().mean()(0) > emb.rowwise().mean()(1) ? 0 : 1;
  CHECK(p.value().leftCols(3) == emb.row(top));

  Mat big = random_mat(10, 4, rng);
  std::vector<int> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Mat shuffled(10, 4);
  for (int i = 0; i < 10; ++i) shuffled.row(i) = big.row(perm[i]);
  Tape t2;
  CHECK(sort_pool(t2.constant(big), 6).value() == sort_pool(t2.constant(shuffled), 6).value());

  Mat ties = Mat::Ones(3, 2);
  CHECK(sort_pool_order(ties, 3) == std::vector<int>{0, 1, 2});
}

TEST_CASE("graph encoder gradients through sort pooling") {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(900 + trial);
    ParamStore ps;
    GraphEncoderConfig cfg{2, 1, 3, 3, 4};
    GraphEncoder enc(ps, "enc", 2, 2, cfg, rng);
    GraphInput g = ring_graph(6, 2, rng);
    const Mat w = random_mat(1, enc.out_size(), rng);
    auto r = grad_check(ps.all(), [&](Tape& t) { return sum(mul(enc.forward(t, g), t.constant(w))); });
    CHECK(r.rel_error < 1e-4);
  }
}

TEST_CASE("full-size encoder runs on the corridor graph") {
  auto sc = builtin_scenario();
  auto g = build_base_graph(sc.corridor);
  Rng rng(1);
  ParamStore ps;
  GraphEncoder enc(ps, "enc", 2, 2, GraphEncoderConfig{}, rng);
  Tape t;
  Var out = enc.forward(t, make_graph_input(feature_matrices(g)));
  CHECK(out.cols() == 32 * 64);
  CHECK(out.value().allFinite());
}

TEST_CASE("distributions") {
  const double sigma = std::exp(-2.5);
  Eigen::RowVectorXd mu(2);
  mu << 0.3, 0.7;
  CHECK(std::exp(gmm_log_density(mu, sigma, mu)) == doctest::Approx(1.0 / (2.0 * std::numbers::pi * sigma * sigma)));
  CHECK(std::exp(gmm_log_density(mu, sigma, mu)) == doctest::Approx(23.63).epsilon(1e-3));
  CHECK_THROWS_AS(gaussian_log_density(mu, 0.0, mu), Error);

  Tape t;
  Var u = t.constant(Mat::Zero(1, 4));
  CHECK(categorical_entropy(u).scalar() == doctest::Approx(std::log(4.0)));
  Var z = t.constant(Mat::Zero(1, 1));
  CHECK(bernoulli_log_prob(z, Mat::Ones(1, 1)).scalar() == doctest::Approx(std::log(0.5)));
  CHECK(bernoulli_entropy(z).scalar() == doctest::Approx(std::log(2.0)));

  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    Eigen::RowVectorXd logits = random_mat(1, 5, rng, 10.0);
    CHECK(softmax(logits).sum() == doctest::Approx(1.0).epsilon(1e-12));
    const int k = categorical_sample(logits, rng);
    Tape tt;
    CHECK(std::isfinite(categorical_log_prob(tt.constant(logits), {k}).scalar()));
    const double zl = 20.0 * (uniform01(rng) - 0.5);
    const int b = bernoulli_sample(zl, rng);
    CHECK(std::isfinite(bernoulli_log_prob(tt.constant(Mat::Constant(1, 1, zl)), Mat::Constant(1, 1, b)).scalar()));
  }
}

TEST_CASE("gmm and policy-head gradients") {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(1300 + trial);
    ParamStore ps;
    Parameter& means = ps.add("mu", 7, 2, rng);
    Parameter& logits = ps.add("lg", 3, 4, rng);
    Parameter& bl = ps.add("bl", 3, 5, rng);
    Eigen::RowVectorXd x = means.value.row(trial % 7) + random_mat(1, 2, rng, 0.05);
    const Mat bx = random_mat(3, 5, rng).unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; });
    auto r = grad_check(ps.all(), [&](Tape& t) {
      Var a = gmm_log_prob(t.param(means), std::exp(-2.5), x);
      Var b = sum(categorical_log_prob(t.param(logits), {0, 3, 2}));
      Var c = sum(categorical_entropy(t.param(logits)));
      Var d = sum(bernoulli_log_prob(t.param(bl), bx));
      Var e = sum(bernoulli_entropy(t.param(bl)));
      return add(add(a, b), add(c, add(d, e)));
    });
    CHECK(r.rel_error < 1e-4);
  }
}

TEST_CASE("adam") {
  Rng rng(2);
  ParamStore ps;
  Parameter& p = ps.add("p", 1, 1, rng, 0.0);
  p.value(0, 0) = 1.0;
  Adam opt(ps.all(), AdamConfig{5e-4});
  ps.zero_grad();
  opt.step();
  CHECK(p.value(0, 0) == 1.0);

  // constant gradient: step magnitude approaches lr
  p.value(0, 0) = 0.0;
  for (int i = 0; i < 1000; ++i) {
    p.grad(0, 0) = 3.0;
    const double before = p.value(0, 0);
    opt.step();
    if (i == 999) CHECK(before - p.value(0, 0) == doctest::Approx(5e-4).epsilon(1e-3));
  }

  // x^2 from x = 1 at lr 5e-4, against a scalar reference loop.
  Parameter& q = ps.add("q", 1, 1, rng, 0.0);
  q.value(0, 0) = 1.0;
  Adam opt2({&q}, AdamConfig{5e-4});
  double x = 1.0, m = 0.0, v = 0.0;
  int steps = 0;
  while (std::abs(q.value(0, 0)) >= 1e-3 && steps < 20000) {
    q.grad(0, 0) = 2.0 * q.value(0, 0);
    opt2.step();
    ++steps;
    const double g = 2.0 * x;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 5e-4 * (m / (1.0 - std::pow(0.9, steps))) / (std::sqrt(v / (1.0 - std::pow(0.999, steps))) + 1e-8);
    REQUIRE(q.value(0, 0) == doctest::Approx(x).epsilon(1e-12));
  }
  CHECK(std::abs(q.value(0, 0)) < 1e-3);
  CHECK(steps < 5000);

  CHECK(linear_anneal(1.0, 0, 10) == 1.0);
  CHECK(linear_anneal(1.0, 5, 10) == 0.5);
  CHECK(linear_anneal(1.0, 20, 10) == 0.0);
}

TEST_CASE("gradient norm clipping") {
  Rng rng(5);
  ParamStore ps;
  Parameter& a = ps.add("a", 1, 2, rng);
  a.grad << 3.0, 4.0;
  CHECK(clip_grad_norm(ps.all(), 0.5) == doctest::Approx(5.0));
  CHECK(a.grad.norm() == doctest::Approx(0.5));
  CHECK(clip_grad_norm(ps.all(), 1.0) == doctest::Approx(0.5));
  CHECK(a.grad.norm() == doctest::Approx(0.5));
}

TEST_CASE("checkpoint json round trip is bit exact") {
  Rng rng(6);
  ParamStore a, b;
  Mlp m1(a, "m", 5, {7}, 3, rng);
  Mlp m2(b, "m", 5, {7}, 3, rng);
  const std::string text = a.to_json().dump();
  b.from_json(nlohmann::json::parse(text));
  for (auto* p : a.all()) CHECK(b.get(p->name).value == p->value);
  ParamStore c;
  Mlp m3(c, "m", 5, {8}, 3, rng);
  CHECK_THROWS_AS(c.from_json(nlohmann::json::parse(text)), Error);

  Adam o1(a.all()), o2(b.all());
  for (auto* p : a.all()) p->grad.setConstant(0.1);
  o1.step();
  o2.load_state(nlohmann::json::parse(o1.state_json().dump()));
  CHECK(o2.steps() == 1);
  CHECK(o2.state_json() == o1.state_json());
}

TEST_CASE("shape errors") {
  Tape t;
  Var a = t.constant(Mat::Zero(2, 3));
  Var b = t.constant(Mat::Zero(2, 2));
  CHECK_THROWS_AS(matmul(a, b), Error);
  CHECK_THROWS_AS(add(a, b), Error);
  CHECK_THROWS_AS(gather_rows(a, {5}), Error);
}

}  // namespace
}  // namespace decor::nn
