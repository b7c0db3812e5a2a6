#include "doctest.h"
#include "grover/encoder.hpp"
#include "grover/grad_check.hpp"
#include "test_util.hpp"

using namespace grover;
using grover::testing::max_abs_diff;

namespace {

SparseAdjacency two_node_graph() {
  Matrix pts(2, 2);
  pts << 0, 0, 1, 0;
  return normalize(knn_graph(pts, 1, Metric::euclidean));
}

SparseAdjacency random_graph(Eigen::Index n, Eigen::Index k, Rng& rng) {
  return normalize(knn_graph(random_uniform(n, 2, 1.0, rng), k, Metric::euclidean));
}

}  // namespace

TEST_CASE("kan_gcn_forward examples") {
  SplineGrid grid(8);
  Rng rng(1);

  SUBCASE("single node, one layer: linear map of the normalized input") {
    SparseAdjacency one;
    one.n = 1;
    one = normalize(one);
    ParamSet p;
    KanGcn enc(p, "e", {3, 2}, grid, rng);
    Matrix x(1, 3);
    x << 0.2, 0.7, 0.4;
    const KanLayer& l = enc.layers()[0];
    p[l.lo()].setZero();
    p[l.range()].setOnes();
    CHECK(max_abs_diff(enc.forward(p, one, x), x * p[l.linear()].transpose()) <= 1e-15);
  }
  SUBCASE("two-node graph with identity layer") {
    ParamSet p;
    KanGcn enc(p, "e", {2, 2}, grid, rng);
    const KanLayer& l = enc.layers()[0];
    p[l.lo()].setZero();
    p[l.range()].setOnes();
    p[l.linear()] = Matrix::Identity(2, 2);
    Matrix x(2, 2);
    x << 2, 0, 0, 2;
    CHECK(enc.forward(p, two_node_graph(), x) == Matrix::Ones(2, 2));
  }
  SUBCASE("all-zero parameters give zero output") {
    ParamSet p;
    KanGcn enc(p, "e", {3, 4, 2}, grid, rng);
    for (const auto& l : enc.layers()) {
      p[l.linear()].setZero();
      p[l.spline()].setZero();
    }
    auto g = random_graph(6, 2, rng);
    CHECK(enc.forward(p, g, random_normal(6, 3, 1.0, rng)).isZero());
  }
  SUBCASE("dimension chain breaks are configuration errors") {
    ParamSet p;
    KanLayer a(p, "a", 3, 4, grid, rng);
    KanLayer b(p, "b", 5, 2, grid, rng);
    CHECK_THROWS_AS(KanGcn(std::vector<KanLayer>{a, b}), ConfigError);
    CHECK_THROWS_AS(kan_gcn_forward(p, two_node_graph(), Matrix::Zero(2, 3), {a, b}), ConfigError);
  }
}

TEST_CASE("kan-gcn with zero splines equals an independent plain GCN") {
  SplineGrid grid(8);
  Rng rng(2);
  auto g = random_graph(20, 4, rng);
  ParamSet p;
  KanGcn enc(p, "e", {5, 6, 3}, grid, rng);
  Matrix x = random_normal(20, 5, 1.0, rng);
  enc.calibrate(p, {{&g, &x}});

  Matrix dense = g.to_dense();
  Matrix h = x;
  for (std::size_t l = 0; l < enc.layers().size(); ++l) {
    const KanLayer& layer = enc.layers()[l];
    Matrix xhat = (h.rowwise() - p[layer.lo()].row(0)).array().rowwise() / p[layer.range()].row(0).array();
    h = dense * (xhat * p[layer.linear()].transpose());
    if (l + 1 < enc.layers().size()) h = h.cwiseMax(0.0);
  }
  CHECK(max_abs_diff(enc.forward(p, g, x), h) <= 1e-12);
}

TEST_CASE("kan-gcn gradients") {
  SplineGrid grid(6);
  Rng rng(3);
  auto g = random_graph(9, 3, rng);
  ParamSet p;
  KanGcn enc(p, "e", {4, 5, 3}, grid, rng);
  Matrix x = random_normal(9, 4, 1.0, rng);
  enc.calibrate(p, {{&g, &x}});
  for (const auto& l : enc.layers()) p[l.spline()] = random_normal(l.out_dim(), l.in_dim() * 6, 0.3, rng);
  Matrix target = random_normal(9, 3, 1.0, rng);
  LossFunction loss = [&](const ParamSet& ps, Gradients* grads) {
    KanGcnCache cache;
    Matrix out = enc.forward(ps, g, x, grads ? &cache : nullptr);
    if (grads) {
      *grads = ps.zeros_like();
      enc.backward(ps, g, cache, out - target, *grads);
    }
    return 0.5 * (out - target).squaredNorm();
  };
  CHECK(grad_check(loss, p).max_rel_error() < 1e-5);
}

TEST_CASE("attention_fuse") {
  Rng rng(4);
  ParamSet p;
  AttentionFusion att(p, "att", 4, 3, rng);
  Matrix s = random_normal(5, 4, 1.0, rng);
  Matrix f = random_normal(5, 4, 1.0, rng);

  SUBCASE("q = 0 gives equal weights and the midpoint") {
    p[att.q()].setZero();
    auto out = attention_fuse(p, att, s, f);
    CHECK(out.attn_weights == Matrix::Constant(5, 2, 0.5));
    CHECK(max_abs_diff(out.fused, 0.5 * (s + f)) <= 1e-15);
  }
  SUBCASE("weights are a softmax of the scores and fused is the convex combination") {
    auto out = attention_fuse(p, att, s, f);
    for (int i = 0; i < 5; ++i) {
      const double ss = (p[att.q()].col(0).transpose() *
                         (p[att.w()] * s.row(i).transpose() + p[att.b()].row(0).transpose()).array().tanh().matrix())(0);
      CHECK(out.scores(i, 0) == doctest::Approx(ss).epsilon(1e-13));
      const double a0 = 1.0 / (1.0 + std::exp(out.scores(i, 1) - out.scores(i, 0)));
      CHECK(out.attn_weights(i, 0) == doctest::Approx(a0).epsilon(1e-13));
      CHECK(out.attn_weights.row(i).sum() == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(out.attn_weights(i, 0) > 0.0);
      CHECK(out.attn_weights(i, 1) > 0.0);
      CHECK(max_abs_diff(out.fused.row(i), out.attn_weights(i, 0) * s.row(i) + out.attn_weights(i, 1) * f.row(i)) <=
            1e-15);
    }
  }
  SUBCASE("scores (0, ln 3) give weights (1/4, 3/4)") {
    // One-dimensional attention space: score = q * tanh(w . e + b).
    ParamSet p1;
    AttentionFusion a1(p1, "a", 1, 1, rng);
    p1[a1.w()](0, 0) = 1.0;
    p1[a1.b()](0, 0) = 0.0;
    const double target = std::log(3.0);
    p1[a1.q()](0, 0) = 2.0;
    Matrix sp(1, 1), ft(1, 1);
    sp(0, 0) = 0.0;
    ft(0, 0) = std::atanh(target / 2.0);
    auto out = attention_fuse(p1, a1, sp, ft);
    CHECK(out.scores(0, 0) == 0.0);
    CHECK(out.scores(0, 1) == doctest::Approx(target).epsilon(1e-14));
    CHECK(out.attn_weights(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(out.attn_weights(0, 1) == doctest::Approx(0.75).epsilon(1e-14));
  }
  SUBCASE("equal inputs fuse to the common vector") {
    auto out = attention_fuse(p, att, s, s);
    CHECK(max_abs_diff(out.fused, s) <= 1e-15);
  }
  SUBCASE("gradients") {
    Matrix target = random_normal(5, 4, 1.0, rng);
    LossFunction loss = [&](const ParamSet& ps, Gradients* grads) {
      AttentionCache cache;
      auto out = att.forward(ps, s, f, &cache);
      if (grads) {
        *grads = ps.zeros_like();
        att.backward(ps, out, cache, out.fused - target, *grads);
      }
      return 0.5 * (out.fused - target).squaredNorm();
    };
    CHECK(grad_check(loss, p).max_rel_error() < 1e-6);

    // Input gradients against central differences.
    AttentionCache cache;
    auto out = att.forward(p, s, f, &cache);
    Gradients grads = p.zeros_like();
    auto [ds, df] = att.backward(p, out, cache, out.fused - target, grads);
    auto value = [&](const Matrix& a, const Matrix& b) {
      return 0.5 * (att.forward(p, a, b).fused - target).squaredNorm();
    };
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 4; ++j) {
        Matrix sp = s, sm = s, fp = f, fm = f;
        sp(i, j) += 1e-6;
        sm(i, j) -= 1e-6;
        fp(i, j) += 1e-6;
        fm(i, j) -= 1e-6;
        CHECK(ds(i, j) == doctest::Approx((value(sp, f) - value(sm, f)) / 2e-6).epsilon(1e-6));
        CHECK(df(i, j) == doctest::Approx((value(s, fp) - value(s, fm)) / 2e-6).epsilon(1e-6));
      }
  }
}

TEST_CASE("kan-gcn and attention are permutation equivariant") {
  SplineGrid grid(8);
  Rng rng(5);
  const Eigen::Index n = 12;
  Matrix pts = random_uniform(n, 2, 1.0, rng);
  Matrix x = random_normal(n, 3, 1.0, rng);
  std::vector<Eigen::Index> perm{5, 2, 11, 0, 7, 1, 9, 3, 10, 4, 8, 6};
  Matrix pp(n, 2), xp(n, 3);
  for (Eigen::Index r = 0; r < n; ++r) {
    pp.row(r) = pts.row(perm[r]);
    xp.row(r) = x.row(perm[r]);
  }
  auto g = normalize(knn_graph(pts, 3, Metric::euclidean));
  auto gp = normalize(knn_graph(pp, 3, Metric::euclidean));
  ParamSet p;
  KanGcn enc(p, "e", {3, 4, 4}, grid, rng);
  AttentionFusion att(p, "a", 4, 2, rng);
  enc.calibrate(p, {{&g, &x}});
  for (const auto& l : enc.layers()) p[l.spline()] = random_normal(l.out_dim(), l.in_dim() * 8, 0.2, rng);
  Matrix h = enc.forward(p, g, x), hp = enc.forward(p, gp, xp);
  auto fused = attention_fuse(p, att, h, h * 0.5).fused;
  auto fused_p = attention_fuse(p, att, hp, hp * 0.5).fused;
  for (Eigen::Index r = 0; r < n; ++r) {
    CHECK(max_abs_diff(hp.row(r), h.row(perm[r])) <= 1e-12);
    CHECK(max_abs_diff(fused_p.row(r), fused.row(perm[r])) <= 1e-12);
  }
}
