#include "grover/alignment.hpp"

namespace grover {

namespace {

// d/de of e / max(|e|, floor) applied to the upstream gradient of the unit rows.
Matrix normalize_rows_backward(const Matrix& e, const Matrix& u, const Matrix& grad_u) {
  Matrix g(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    const double norm = e.row(i).norm();
    if (norm > kMinRowNorm)
      g.row(i) = (grad_u.row(i) - u.row(i) * u.row(i).dot(grad_u.row(i))) / norm;
    else
      g.row(i) = grad_u.row(i) / kMinRowNorm;
  }
  return g;
}

}  // namespace

SimilarityMask build_mask(const Matrix& sim, double delta) {
  if (sim.rows() != sim.cols()) throw ArgumentError("build_mask: similarity matrix must be square");
  SimilarityMask out{sim, Matrix::Ones(sim.rows(), sim.cols()), delta};
  for (Eigen::Index i = 0; i < sim.rows(); ++i)
    for (Eigen::Index j = 0; j < sim.cols(); ++j)
      if (i != j && sim(i, j) > delta) out.mask(i, j) = 0.0;
  return out;
}

double masked_infonce(const Matrix& anchor, const Matrix& positive, const Matrix& mask, double tau,
                      Matrix* grad_anchor, Matrix* grad_positive) {
  if (!(tau > 0)) throw ArgumentError("masked_infonce: tau must be positive");
  const Eigen::Index n = anchor.rows();
  if (positive.rows() != n || positive.cols() != anchor.cols())
    throw ArgumentError("masked_infonce: embedding shapes differ");
  if (mask.rows() != n || mask.cols() != n) throw ArgumentError("masked_infonce: mask must be N x N");
  if (n == 0) return 0.0;

  const Matrix ua = normalize_rows(anchor);
  const Matrix up = normalize_rows(positive);
  const Matrix logits = (ua * up.transpose()) / tau;

  const bool want_grad = grad_anchor || grad_positive;
  Matrix g;
  if (want_grad) g = Matrix::Zero(n, n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = logits(i, i);
    for (Eigen::Index j = 0; j < n; ++j)
      if (mask(i, j) != 0.0) mx = std::max(mx, logits(i, j));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (mask(i, j) != 0.0) sum += std::exp(logits(i, j) - mx);
    const double lse = mx + std::log(sum);
    loss += lse - logits(i, i);
    if (want_grad) {
      for (Eigen::Index j = 0; j < n; ++j)
        if (mask(i, j) != 0.0) g(i, j) = std::exp(logits(i, j) - lse);
      g(i, i) -= 1.0;
    }
  }
  const double scale = 1.0 / static_cast<double>(n);
  if (want_grad) {
    g *= scale / tau;
    if (grad_anchor) *grad_anchor += normalize_rows_backward(anchor, ua, g * up);
    if (grad_positive) *grad_positive += normalize_rows_backward(positive, up, g.transpose() * ua);
  }
  return loss * scale;
}

ContrastiveResult pairwise_contrastive(const std::vector<const Matrix*>& embeddings, double delta, double tau,
                                       std::vector<Matrix>* grads) {
  ContrastiveResult out;
  if (embeddings.size() < 2) {
    out.warning = "contrastive loss needs at least two modalities; returning 0";
    return out;
  }
  std::vector<Matrix> masks;
  for (const Matrix* e : embeddings) masks.push_back(build_mask(cosine_sim_matrix(*e), delta).mask);
  for (std::size_t a = 0; a < embeddings.size(); ++a) {
    for (std::size_t b = a + 1; b < embeddings.size(); ++b) {
      Matrix* ga = grads ? &(*grads)[a] : nullptr;
      Matrix* gb = grads ? &(*grads)[b] : nullptr;
      Matrix da, db;
      if (grads) {
        da = Matrix::Zero(embeddings[a]->rows(), embeddings[a]->cols());
        db = Matrix::Zero(embeddings[b]->rows(), embeddings[b]->cols());
      }
      const double ab = masked_infonce(*embeddings[a], *embeddings[b], masks[a], tau, grads ? &da : nullptr,
                                       grads ? &db : nullptr);
      const double ba = masked_infonce(*embeddings[b], *embeddings[a], masks[b], tau, grads ? &db : nullptr,
                                       grads ? &da : nullptr);
      if (grads) {
        *ga += 0.5 * da;
        *gb += 0.5 * db;
      }
      const double v = 0.5 * (ab + ba);
      out.pairs.push_back({a, b, v});
      out.total += v;
    }
  }
  return out;
}

}  // namespace grover
