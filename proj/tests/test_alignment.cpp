#include "doctest.h"
#include "grover/alignment.hpp"
#include "grover/grad_check.hpp"
#include "test_util.hpp"

using namespace grover;
using grover::testing::max_abs_diff;

namespace {

// Naive per-entry evaluation of the directed masked loss.
double naive_infonce(const Matrix& a, const Matrix& b, const Matrix& mask, double tau) {
  const Eigen::Index n = a.rows();
  auto cos = [](const RowVector& u, const RowVector& v) { return u.dot(v) / (u.norm() * v.norm()); };
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double num = std::exp(cos(a.row(i), b.row(i)) / tau);
    double den = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) den += mask(i, j) * std::exp(cos(a.row(i), b.row(j)) / tau);
    loss -= std::log(num / den);
  }
  return loss / static_cast<double>(n);
}

Matrix naive_mask(const Matrix& e, double delta) {
  const Eigen::Index n = e.rows();
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double c = e.row(i).dot(e.row(j)) / (e.row(i).norm() * e.row(j).norm());
      m(i, j) = (i != j && c > delta) ? 0.0 : 1.0;
    }
  return m;
}

}  // namespace

TEST_CASE("cosine_sim_matrix examples") {
  Matrix same(2, 3);
  same << 1, 2, 3, 1, 2, 3;
  CHECK(cosine_sim_matrix(same)(0, 1) == doctest::Approx(1.0).epsilon(1e-15));

  Matrix orth(2, 2);
  orth << 1, 0, 0, 1;
  CHECK(cosine_sim_matrix(orth)(0, 1) == 0.0);

  Matrix diag(2, 2);
  diag << 1, 0, 1, 1;
  CHECK(cosine_sim_matrix(diag)(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

  Rng rng(1);
  Matrix e = random_normal(10, 4, 3.0, rng);
  Matrix s = cosine_sim_matrix(e);
  CHECK(s == s.transpose());
  for (int i = 0; i < 10; ++i) CHECK(std::abs(s(i, i) - 1.0) <= 1e-12);
  CHECK(s.maxCoeff() <= 1.0 + 1e-12);
  CHECK(s.minCoeff() >= -1.0 - 1e-12);

  // Zero rows stay finite.
  Matrix z = Matrix::Zero(2, 3);
  CHECK(cosine_sim_matrix(z).allFinite());
}

TEST_CASE("build_mask examples") {
  Rng rng(2);
  Matrix e = random_normal(6, 3, 1.0, rng);
  Matrix s = cosine_sim_matrix(e);
  CHECK(build_mask(s, 1.5).mask == Matrix::Ones(6, 6));
  CHECK(build_mask(s, -1.5).mask == Matrix::Identity(6, 6));

  Matrix hand = Matrix::Identity(3, 3);
  hand(0, 1) = hand(1, 0) = 0.95;
  hand(0, 2) = hand(2, 0) = 0.2;
  hand(1, 2) = hand(2, 1) = 0.9;  // not strictly above delta
  auto m = build_mask(hand, 0.9);
  Matrix expect = Matrix::Ones(3, 3);
  expect(0, 1) = expect(1, 0) = 0.0;
  CHECK(m.mask == expect);
  CHECK(m.delta == 0.9);
  CHECK(m.sim == hand);
}

TEST_CASE("masked_infonce examples") {
  Rng rng(3);
  Matrix one = random_normal(1, 4, 1.0, rng), other = random_normal(1, 4, 1.0, rng);
  CHECK(masked_infonce(one, other, Matrix::Ones(1, 1), 0.5) == doctest::Approx(0.0).epsilon(1e-15));

  Matrix a = random_normal(5, 3, 1.0, rng), b = random_normal(5, 3, 1.0, rng);
  CHECK(std::abs(masked_infonce(a, b, Matrix::Identity(5, 5), 0.5)) <= 1e-15);

  Matrix u = normalize_rows(random_normal(3, 4, 1.0, rng));
  Matrix v = normalize_rows(random_normal(3, 4, 1.0, rng));
  CHECK(std::abs(masked_infonce(u, v, Matrix::Ones(3, 3), 0.5) - naive_infonce(u, v, Matrix::Ones(3, 3), 0.5)) <=
        1e-10);

  CHECK_THROWS_AS(masked_infonce(a, b, Matrix::Ones(5, 5), 0.0), ArgumentError);
  CHECK_THROWS_AS(masked_infonce(a, b, Matrix::Ones(5, 5), -1.0), ArgumentError);
}

TEST_CASE("masked_infonce matches the naive double loop across thresholds and temperatures") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(15));
    Matrix a = random_normal(n, 5, 1.0, rng), b = random_normal(n, 5, 1.0, rng);
    for (double delta : {-1.5, 0.5, 0.9, 1.5})
      for (double tau : {0.1, 0.5, 1.0}) {
        Matrix mask = build_mask(cosine_sim_matrix(a), delta).mask;
        CHECK(mask == naive_mask(a, delta));
        const double fast = masked_infonce(a, b, mask, tau);
        CHECK(std::abs(fast - naive_infonce(a, b, mask, tau)) <= 1e-10);
        CHECK(fast >= -1e-15);
      }
  }
}

TEST_CASE("masked_infonce is stable at small temperature") {
  Rng rng(5);
  Matrix a = random_normal(8, 3, 1.0, rng), b = random_normal(8, 3, 1.0, rng);
  CHECK(std::isfinite(masked_infonce(a, b, Matrix::Ones(8, 8), 1e-4)));
}

TEST_CASE("masked_infonce properties") {
  Rng rng(6);
  Matrix a = random_normal(7, 4, 1.0, rng), b = random_normal(7, 4, 1.0, rng);
  Matrix mask = build_mask(cosine_sim_matrix(a), 0.5).mask;
  const double base = masked_infonce(a, b, mask, 0.5);
  Matrix scaled_a = a, scaled_b = b;
  scaled_a.row(2) *= 7.5;
  scaled_b.row(4) *= 0.01;
  CHECK(std::abs(masked_infonce(scaled_a, scaled_b, mask, 0.5) - base) <= 1e-12);

  // Converges to zero as b -> a with identity mask regime and small tau.
  CHECK(masked_infonce(a, a, Matrix::Identity(7, 7), 0.5) == doctest::Approx(0.0));
}

TEST_CASE("pairwise_contrastive") {
  Rng rng(7);
  SUBCASE("identical embeddings with everything masked give zero") {
    Matrix e = random_normal(6, 3, 1.0, rng);
    auto r = pairwise_contrastive({&e, &e, &e}, -1.5, 0.5);
    CHECK(std::abs(r.total) <= 1e-15);
    CHECK(r.pairs.size() == 3);
  }
  SUBCASE("two modalities give one pair term") {
    Matrix a = random_normal(6, 3, 1.0, rng), b = random_normal(6, 3, 1.0, rng);
    auto r = pairwise_contrastive({&a, &b}, 0.9, 0.5);
    REQUIRE(r.pairs.size() == 1);
    CHECK(r.pairs[0].first == 0);
    CHECK(r.pairs[0].second == 1);
    CHECK(r.total == r.pairs[0].value);
  }
  SUBCASE("three modalities equal the halved sum of six directed naive losses") {
    Matrix e[3] = {random_normal(9, 4, 1.0, rng), random_normal(9, 4, 1.0, rng), random_normal(9, 4, 1.0, rng)};
    const double delta = 0.3, tau = 0.5;
    double expect = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        if (a != b) expect += 0.5 * naive_infonce(e[a], e[b], naive_mask(e[a], delta), tau);
    auto r = pairwise_contrastive({&e[0], &e[1], &e[2]}, delta, tau);
    CHECK(std::abs(r.total - expect) <= 1e-10);

    // Relabeling modalities leaves the total unchanged.
    auto swapped = pairwise_contrastive({&e[2], &e[0], &e[1]}, delta, tau);
    CHECK(std::abs(swapped.total - r.total) <= 1e-12);
  }
  SUBCASE("single modality warns and returns zero") {
    Matrix a = random_normal(4, 3, 1.0, rng);
    auto r = pairwise_contrastive({&a}, 0.9, 0.5);
    CHECK(r.total == 0.0);
    CHECK_FALSE(r.warning.empty());
  }
  SUBCASE("gradients") {
    ParamSet p;
    p.add("e0", random_normal(6, 3, 1.0, rng));
    p.add("e1", random_normal(6, 3, 1.0, rng));
    p.add("e2", random_normal(6, 3, 1.0, rng));
    // delta chosen so that masks are neither empty nor full; the mask is a
    // constant of the loss, so perturbations must not flip it.
    LossFunction loss = [&](const ParamSet& ps, Gradients* grads) {
      std::vector<Matrix> g(3);
      for (int m = 0; m < 3; ++m) g[m] = Matrix::Zero(6, 3);
      auto r = pairwise_contrastive({&ps[0], &ps[1], &ps[2]}, 0.6, 0.5, grads ? &g : nullptr);
      if (grads) *grads = g;
      return r.total;
    };
    CHECK(grad_check(loss, p).max_rel_error() < 1e-6);
  }
}
