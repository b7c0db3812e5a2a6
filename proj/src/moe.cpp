#include "grover/moe.hpp"

namespace grover {

GateDecision gate(const std::vector<const Matrix*>& embeddings, const Matrix& w_gate, double gamma) {
  if (embeddings.empty()) throw ConfigError("gate: no modality embeddings");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ArgumentError("gate: gamma must lie in (0, 1)");
  const auto m = static_cast<Eigen::Index>(embeddings.size());
  const Eigen::Index n = embeddings[0]->rows(), d = embeddings[0]->cols();
  for (const Matrix* e : embeddings)
    if (e->rows() != n || e->cols() != d) throw ConfigError("gate: modality embeddings differ in shape");
  if (w_gate.rows() != d || w_gate.cols() != m)
    throw ConfigError("gate: W_gate must be " + std::to_string(d) + " x " + std::to_string(m));

  GateDecision out;
  out.gamma = gamma;
  out.input = Matrix::Zero(n, d);
  for (const Matrix* e : embeddings) out.input += *e;
  out.input /= static_cast<double>(m);

  const Matrix logits = out.input * w_gate;
  out.raw.resize(n, m);
  out.filtered.resize(n, m);
  out.weights = Matrix::Zero(n, m);
  out.fallback.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) sum += std::exp(logits(i, k) - mx);
    double kept = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      out.raw(i, k) = std::exp(logits(i, k) - mx) / sum;
      out.filtered(i, k) = out.raw(i, k) >= gamma ? out.raw(i, k) : 0.0;
      kept += out.filtered(i, k);
    }
    if (kept == 0.0) {
      Eigen::Index best = 0;
      for (Eigen::Index k = 1; k < m; ++k)
        if (out.raw(i, k) > out.raw(i, best)) best = k;
      out.weights(i, best) = 1.0;
      out.fallback[static_cast<std::size_t>(i)] = true;
    } else {
      out.weights.row(i) = out.filtered.row(i) / (kept + out.epsilon);
    }
  }
  return out;
}

void gate_backward(const GateDecision& decision, const Matrix& w_gate, const Matrix& grad_weights,
                   Matrix& grad_w_gate, std::vector<Matrix>& grad_embeddings) {
  const Eigen::Index n = decision.size(), m = decision.raw.cols();
  Matrix d_logits = Matrix::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (decision.fallback[static_cast<std::size_t>(i)]) continue;
    const double denom = decision.filtered.row(i).sum() + decision.epsilon;
    const double cross = grad_weights.row(i).dot(decision.filtered.row(i)) / (denom * denom);
    Eigen::RowVectorXd d_raw = Eigen::RowVectorXd::Zero(m);
    for (Eigen::Index k = 0; k < m; ++k)
      if (decision.filtered(i, k) > 0.0) d_raw(k) = grad_weights(i, k) / denom - cross;
    const double inner = d_raw.dot(decision.raw.row(i));
    d_logits.row(i) = decision.raw.row(i).cwiseProduct(d_raw.array().matrix() - Eigen::RowVectorXd::Constant(m, inner));
  }
  grad_w_gate.noalias() += decision.input.transpose() * d_logits;
  const Matrix d_input = (d_logits * w_gate.transpose()) / static_cast<double>(m);
  for (auto& g : grad_embeddings) g += d_input;
}

FusedRepresentation combine(std::vector<Matrix> expert_outputs, const Matrix& weights) {
  if (expert_outputs.empty()) throw ConfigError("combine: no expert outputs");
  if (static_cast<Eigen::Index>(expert_outputs.size()) != weights.cols())
    throw ArgumentError("combine: weight columns do not match expert count");
  FusedRepresentation out;
  out.z = Matrix::Zero(expert_outputs[0].rows(), expert_outputs[0].cols());
  for (std::size_t k = 0; k < expert_outputs.size(); ++k) {
    if (expert_outputs[k].rows() != weights.rows() || expert_outputs[k].cols() != out.z.cols())
      throw ArgumentError("combine: expert output shape mismatch");
    out.z += weights.col(static_cast<Eigen::Index>(k)).asDiagonal() * expert_outputs[k];
  }
  out.expert_outputs = std::move(expert_outputs);
  return out;
}

FusedRepresentation fuse(const ParamSet& params, const std::vector<const Matrix*>& embeddings,
                         const std::vector<Ffn>& experts, const GateDecision& decision) {
  if (experts.size() != embeddings.size()) throw ArgumentError("fuse: one expert per modality required");
  std::vector<Matrix> h;
  for (std::size_t k = 0; k < experts.size(); ++k) h.push_back(experts[k].forward(params, *embeddings[k]));
  return combine(std::move(h), decision.weights);
}

Matrix decode(const ParamSet& params, const Matrix& z, const SparseAdjacency& adj_spatial, const KanLayer& decoder,
              KanCache* cache, bool use_spline) {
  if (z.cols() != decoder.in_dim())
    throw ConfigError("decode: decoder expects width " + std::to_string(decoder.in_dim()) + ", got " +
                      std::to_string(z.cols()));
  return spmm(adj_spatial, decoder.forward(params, z, cache, use_spline));
}

double reconstruction_loss(const Matrix& original, const Matrix& reconstructed, Matrix* grad_reconstructed) {
  if (original.rows() != reconstructed.rows() || original.cols() != reconstructed.cols())
    throw ArgumentError("reconstruction_loss: shape mismatch");
  if (original.rows() == 0) return 0.0;
  const double n = static_cast<double>(original.rows());
  const Matrix diff = reconstructed - original;
  if (grad_reconstructed) *grad_reconstructed = (2.0 / n) * diff;
  return diff.squaredNorm() / n;
}

double total_loss(const std::vector<double>& reconstruction, double contrast, double lambda) {
  if (lambda < 0) throw ArgumentError("total_loss: lambda must be nonnegative");
  double sum = 0.0;
  for (double r : reconstruction) sum += r;
  return sum + lambda * contrast;
}

}  // namespace grover
