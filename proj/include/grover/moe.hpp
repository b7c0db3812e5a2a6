#pragma once

#include <vector>

#include "grover/ffn.hpp"
#include "grover/graph.hpp"
#include "grover/kan.hpp"

namespace grover {

inline constexpr double kGateEpsilon = 1e-6;

/// Per-spot routing decision over M modality experts.
struct GateDecision {
  Matrix input;     // N x D, mean of the modality embeddings
  Matrix raw;       // N x M softmax confidences
  Matrix filtered;  // raw where raw >= gamma, else 0
  Matrix weights;   // N x M expert weights
  std::vector<bool> fallback;
  double gamma = 0.0;
  double epsilon = kGateEpsilon;

  Eigen::Index size() const { return raw.rows(); }
};

/// Thresholded, renormalized softmax gate. Rows where no confidence reaches
/// gamma fall back to a one-hot weight on the argmax (first modality wins ties).
GateDecision gate(const std::vector<const Matrix*>& embeddings, const Matrix& w_gate, double gamma);

/// Back-propagates d loss / d weights through the renormalization and softmax.
/// The survivor set and fallback rows are held fixed. Accumulates into
/// `grad_w_gate` and each entry of `grad_embeddings`.
void gate_backward(const GateDecision& decision, const Matrix& w_gate, const Matrix& grad_weights,
                   Matrix& grad_w_gate, std::vector<Matrix>& grad_embeddings);

struct FusedRepresentation {
  Matrix z;                           // N x D
  std::vector<Matrix> expert_outputs; // per modality, N x D
};

/// z_i = sum_m s_im h_im using precomputed expert outputs.
FusedRepresentation combine(std::vector<Matrix> expert_outputs, const Matrix& weights);

/// Runs each modality's expert then combines with the gate's weights.
FusedRepresentation fuse(const ParamSet& params, const std::vector<const Matrix*>& embeddings,
                         const std::vector<Ffn>& experts, const GateDecision& decision);

/// Graph decoder for one modality: A_hat * F_dec(Z) with identity activation.
Matrix decode(const ParamSet& params, const Matrix& z, const SparseAdjacency& adj_spatial, const KanLayer& decoder,
              KanCache* cache = nullptr, bool use_spline = true);

/// (1/N) sum_i |f_i - fhat_i|^2; optionally writes d loss / d fhat.
double reconstruction_loss(const Matrix& original, const Matrix& reconstructed, Matrix* grad_reconstructed = nullptr);

/// sum of reconstruction terms + lambda * contrastive term.
double total_loss(const std::vector<double>& reconstruction, double contrast, double lambda);

}  // namespace grover
