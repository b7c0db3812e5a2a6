#include "grover/encoder.hpp"

namespace grover {

KanGcn::KanGcn(ParamSet& params, const std::string& prefix, const std::vector<Eigen::Index>& dims,
               const SplineGrid& grid, Rng& rng) {
  if (dims.size() < 2) throw ConfigError("KAN-GCN needs at least one layer");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    layers_.emplace_back(params, prefix + ".l" + std::to_string(l), dims[l], dims[l + 1], grid, rng);
}

KanGcn::KanGcn(const ParamSet& params, const std::string& prefix, std::size_t num_layers, const SplineGrid& grid) {
  for (std::size_t l = 0; l < num_layers; ++l) layers_.emplace_back(params, prefix + ".l" + std::to_string(l), grid);
  for (std::size_t l = 1; l < layers_.size(); ++l)
    if (layers_[l].in_dim() != layers_[l - 1].out_dim()) throw ConfigError("KAN-GCN '" + prefix + "': broken dimension chain");
}

KanGcn::KanGcn(std::vector<KanLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("KAN-GCN needs at least one layer");
  for (std::size_t l = 1; l < layers_.size(); ++l)
    if (layers_[l].in_dim() != layers_[l - 1].out_dim())
      throw ConfigError("KAN-GCN: layer " + std::to_string(l) + " expects width " +
                        std::to_string(layers_[l].in_dim()) + ", previous layer produces " +
                        std::to_string(layers_[l - 1].out_dim()));
}

void KanGcn::calibrate(ParamSet& params,
                       const std::vector<std::pair<const SparseAdjacency*, const Matrix*>>& runs) const {
  std::vector<Matrix> h;
  for (const auto& run : runs) h.push_back(*run.second);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    std::vector<const Matrix*> inputs;
    for (const auto& m : h) inputs.push_back(&m);
    layers_[l].calibrate(params, inputs);
    for (std::size_t r = 0; r < runs.size(); ++r) {
      Matrix p = spmm(*runs[r].first, layers_[l].forward(params, h[r]));
      h[r] = l + 1 < layers_.size() ? Matrix(p.cwiseMax(0.0)) : p;
    }
  }
}

Matrix KanGcn::forward(const ParamSet& params, const SparseAdjacency& adj, const Matrix& x, KanGcnCache* cache,
                       bool use_spline) const {
  if (cache) {
    cache->kan.assign(layers_.size(), {});
    cache->propagated.assign(layers_.size(), {});
  }
  Matrix h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix p = spmm(adj, layers_[l].forward(params, h, cache ? &cache->kan[l] : nullptr, use_spline));
    h = l + 1 < layers_.size() ? Matrix(p.cwiseMax(0.0)) : p;
    if (cache) cache->propagated[l] = std::move(p);
  }
  return h;
}

void KanGcn::backward(const ParamSet& params, const SparseAdjacency& adj, const KanGcnCache& cache,
                      const Matrix& grad_out, Gradients& grads, bool use_spline) const {
  Matrix grad = grad_out;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (l + 1 < layers_.size())
      grad = grad.cwiseProduct((cache.propagated[l].array() > 0.0).cast<double>().matrix());
    // A_hat is symmetric, so its transpose product is another spmm.
    Matrix grad_transformed = spmm(adj, grad);
    grad = layers_[l].backward(params, cache.kan[l], grad_transformed, grads, l > 0, use_spline);
  }
}

Matrix kan_gcn_forward(const ParamSet& params, const SparseAdjacency& adj, const Matrix& x,
                       const std::vector<KanLayer>& layers, bool use_spline) {
  if (!adj.normalized) throw ArgumentError("kan_gcn_forward: adjacency must be normalized");
  return KanGcn(layers).forward(params, adj, x, nullptr, use_spline);
}

AttentionFusion::AttentionFusion(ParamSet& params, const std::string& prefix, Eigen::Index dim, Eigen::Index att_dim,
                                 Rng& rng) {
  const double bw = 1.0 / std::sqrt(static_cast<double>(dim));
  const double bq = 1.0 / std::sqrt(static_cast<double>(att_dim));
  w_ = params.add(prefix + ".w", random_uniform(att_dim, dim, bw, rng));
  b_ = params.add(prefix + ".b", random_uniform(1, att_dim, bw, rng));
  q_ = params.add(prefix + ".q", random_uniform(att_dim, 1, bq, rng));
}

AttentionFusion::AttentionFusion(const ParamSet& params, const std::string& prefix) {
  w_ = params.id(prefix + ".w");
  b_ = params.id(prefix + ".b");
  q_ = params.id(prefix + ".q");
}

ModalityEmbeddings AttentionFusion::forward(const ParamSet& params, const Matrix& spatial, const Matrix& feature,
                                            AttentionCache* cache) const {
  if (spatial.rows() != feature.rows() || spatial.cols() != feature.cols())
    throw ArgumentError("attention_fuse: spatial and feature embeddings differ in shape");
  if (spatial.cols() != params[w_].cols())
    throw ArgumentError("attention_fuse: embedding width does not match attention parameters");
  const Matrix& w = params[w_];
  Matrix ts = ((spatial * w.transpose()).rowwise() + params[b_].row(0)).array().tanh();
  Matrix tf = ((feature * w.transpose()).rowwise() + params[b_].row(0)).array().tanh();

  ModalityEmbeddings out;
  const Eigen::Index n = spatial.rows();
  out.scores.resize(n, 2);
  out.scores.col(0) = ts * params[q_];
  out.scores.col(1) = tf * params[q_];
  out.attn_weights.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = std::max(out.scores(i, 0), out.scores(i, 1));
    const double es = std::exp(out.scores(i, 0) - m), ef = std::exp(out.scores(i, 1) - m);
    out.attn_weights(i, 0) = es / (es + ef);
    out.attn_weights(i, 1) = ef / (es + ef);
  }
  out.fused = out.attn_weights.col(0).asDiagonal() * spatial + out.attn_weights.col(1).asDiagonal() * feature;
  out.spatial = spatial;
  out.feature = feature;
  if (cache) {
    cache->tanh_spatial = std::move(ts);
    cache->tanh_feature = std::move(tf);
  }
  return out;
}

std::pair<Matrix, Matrix> AttentionFusion::backward(const ParamSet& params, const ModalityEmbeddings& out,
                                                    const AttentionCache& cache, const Matrix& grad_fused,
                                                    Gradients& grads) const {
  const Vector& as = out.attn_weights.col(0);
  const Vector& af = out.attn_weights.col(1);
  Matrix d_spatial = as.asDiagonal() * grad_fused;
  Matrix d_feature = af.asDiagonal() * grad_fused;

  const Vector d_as = grad_fused.cwiseProduct(out.spatial).rowwise().sum();
  const Vector d_af = grad_fused.cwiseProduct(out.feature).rowwise().sum();
  const Vector inner = as.cwiseProduct(d_as) + af.cwiseProduct(d_af);
  const Vector d_score_s = as.cwiseProduct(d_as - inner);
  const Vector d_score_f = af.cwiseProduct(d_af - inner);

  const Matrix& w = params[w_];
  const Matrix& q = params[q_];
  auto through_score = [&](const Matrix& t, const Vector& d_score, const Matrix& e, Matrix& d_e) {
    grads[q_].noalias() += t.transpose() * d_score;
    Matrix d_pre = (d_score * q.transpose()).cwiseProduct((1.0 - t.array().square()).matrix());
    grads[w_].noalias() += d_pre.transpose() * e;
    grads[b_] += d_pre.colwise().sum();
    d_e.noalias() += d_pre * w;
  };
  through_score(cache.tanh_spatial, d_score_s, out.spatial, d_spatial);
  through_score(cache.tanh_feature, d_score_f, out.feature, d_feature);
  return {std::move(d_spatial), std::move(d_feature)};
}

}  // namespace grover
