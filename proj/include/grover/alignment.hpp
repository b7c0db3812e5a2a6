#pragma once

#include <string>
#include <vector>

#include "grover/common.hpp"

namespace grover {

inline constexpr double kMinRowNorm = 1e-12;

/// Rows scaled to unit length; rows with norm below kMinRowNorm are divided by
/// kMinRowNorm instead.
template <typename Derived>
MatrixX<typename Derived::Scalar> normalize_rows(const Eigen::MatrixBase<Derived>& e) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> u = e;
  for (Eigen::Index i = 0; i < u.rows(); ++i) u.row(i) /= std::max(u.row(i).norm(), Scalar(kMinRowNorm));
  return u;
}

/// Pairwise cosine similarity of the rows of `e`.
template <typename Derived>
MatrixX<typename Derived::Scalar> cosine_sim_matrix(const Eigen::MatrixBase<Derived>& e) {
  const auto u = normalize_rows(e);
  return u * u.transpose();
}

struct SimilarityMask {
  Matrix sim;   // N x N cosine similarities
  Matrix mask;  // N x N, entries 0 or 1
  double delta = 0.0;
};

/// mask(i,j) = 0 iff sim(i,j) > delta and i != j.
SimilarityMask build_mask(const Matrix& sim, double delta);

/// Masked InfoNCE -(1/N) sum_i log s_i where the denominator of s_i keeps only
/// the anchors' unmasked candidates. Gradients are accumulated into the
/// optional outputs; the mask is treated as constant.
double masked_infonce(const Matrix& anchor, const Matrix& positive, const Matrix& mask, double tau,
                      Matrix* grad_anchor = nullptr, Matrix* grad_positive = nullptr);

struct PairLoss {
  std::size_t first = 0;
  std::size_t second = 0;
  double value = 0.0;  // 0.5 * (l(first->second) + l(second->first))
};

struct ContrastiveResult {
  double total = 0.0;
  std::vector<PairLoss> pairs;
  std::string warning;
};

/// Sum over unordered modality pairs (index order) of the symmetric masked
/// InfoNCE; each direction uses its anchor modality's own mask.
ContrastiveResult pairwise_contrastive(const std::vector<const Matrix*>& embeddings, double delta, double tau,
                                       std::vector<Matrix>* grads = nullptr);

}  // namespace grover
