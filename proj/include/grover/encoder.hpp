#pragma once

#include <string>
#include <vector>

#include "grover/graph.hpp"
#include "grover/kan.hpp"
#include "grover/params.hpp"

namespace grover {

struct KanGcnCache {
  std::vector<KanCache> kan;
  std::vector<Matrix> propagated;  // A_hat * F(H) per layer, before the activation
};

/// Stack of KAN-GCN layers: H(l+1) = sigma(A_hat * F_l(H(l))), sigma = max(., 0)
/// on hidden layers and the identity on the last one.
class KanGcn {
 public:
  KanGcn() = default;
  /// `dims` lists d_0, ..., d_L.
  KanGcn(ParamSet& params, const std::string& prefix, const std::vector<Eigen::Index>& dims, const SplineGrid& grid,
         Rng& rng);
  KanGcn(const ParamSet& params, const std::string& prefix, std::size_t num_layers, const SplineGrid& grid);
  explicit KanGcn(std::vector<KanLayer> layers);

  const std::vector<KanLayer>& layers() const { return layers_; }
  Eigen::Index in_dim() const { return layers_.front().in_dim(); }
  Eigen::Index out_dim() const { return layers_.back().out_dim(); }

  /// Runs the stack once per (graph, input) pair, freezing each layer's input
  /// normalization over all pairs' activations.
  void calibrate(ParamSet& params, const std::vector<std::pair<const SparseAdjacency*, const Matrix*>>& runs) const;

  Matrix forward(const ParamSet& params, const SparseAdjacency& adj, const Matrix& x, KanGcnCache* cache = nullptr,
                 bool use_spline = true) const;
  void backward(const ParamSet& params, const SparseAdjacency& adj, const KanGcnCache& cache, const Matrix& grad_out,
                Gradients& grads, bool use_spline = true) const;

 private:
  std::vector<KanLayer> layers_;
};

/// Free-function form: validates the dimension chain and runs the stack.
Matrix kan_gcn_forward(const ParamSet& params, const SparseAdjacency& adj, const Matrix& x,
                       const std::vector<KanLayer>& layers, bool use_spline = true);

/// Spatial/feature embeddings of one modality and their attention fusion.
struct ModalityEmbeddings {
  Matrix spatial;       // N x d_L
  Matrix feature;       // N x d_L
  Matrix fused;         // N x d_L
  Matrix attn_weights;  // N x 2, columns (spatial, feature)
  Matrix scores;        // N x 2 pre-softmax compatibility scores
};

struct AttentionCache {
  Matrix tanh_spatial;  // N x d_att
  Matrix tanh_feature;
};

/// Within-modality attention: score = q^T tanh(W e + b), two-way softmax,
/// convex combination of the two embeddings.
class AttentionFusion {
 public:
  AttentionFusion() = default;
  AttentionFusion(ParamSet& params, const std::string& prefix, Eigen::Index dim, Eigen::Index att_dim, Rng& rng);
  AttentionFusion(const ParamSet& params, const std::string& prefix);

  ParamSet::Id w() const { return w_; }
  ParamSet::Id b() const { return b_; }
  ParamSet::Id q() const { return q_; }

  ModalityEmbeddings forward(const ParamSet& params, const Matrix& spatial, const Matrix& feature,
                             AttentionCache* cache = nullptr) const;
  /// Returns gradients w.r.t. (spatial, feature).
  std::pair<Matrix, Matrix> backward(const ParamSet& params, const ModalityEmbeddings& out,
                                     const AttentionCache& cache, const Matrix& grad_fused, Gradients& grads) const;

 private:
  ParamSet::Id w_ = 0, b_ = 0, q_ = 0;
};

inline ModalityEmbeddings attention_fuse(const ParamSet& params, const AttentionFusion& att, const Matrix& spatial,
                                         const Matrix& feature) {
  return att.forward(params, spatial, feature);
}

}  // namespace grover
