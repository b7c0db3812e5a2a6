#pragma once

#include <map>
#include <string>
#include <vector>

#include "grover/alignment.hpp"
#include "grover/config.hpp"
#include "grover/data_io.hpp"
#include "grover/encoder.hpp"
#include "grover/moe.hpp"

namespace grover {

/// Spatial KNN graph (euclidean) and per-modality feature graphs (cosine),
/// normalized. k is capped at N - 1.
GraphSet build_graphs(const SpotDataset& dataset, const TrainConfig& config);

struct LossBreakdown {
  std::vector<double> reconstruction;  // per modality
  std::vector<PairLoss> contrast;      // per unordered modality pair
  double contrast_total = 0.0;
  double total = 0.0;
};

struct ForwardResult {
  std::vector<ModalityEmbeddings> embeddings;  // per modality
  GateDecision decision;                       // empty when MoE is disabled
  FusedRepresentation fused;
  std::vector<Matrix> reconstructions;
};

/// Layer structure of the full model over a ParamSet. Holds tensor ids only;
/// all numeric state lives in the ParamSet.
class GroverModel {
 public:
  GroverModel() = default;

  /// Register freshly initialized parameters for `dataset`'s modalities, then
  /// run the first forward pass that freezes every KAN input normalization.
  static GroverModel initialize(const TrainConfig& config, const SpotDataset& dataset, const GraphSet& graphs,
                                ParamSet& params);

  /// Rebuild the structure from an existing parameter set.
  static GroverModel attach(const TrainConfig& config, const std::vector<std::string>& modality_names,
                            const ParamSet& params);

  const TrainConfig& config() const { return config_; }
  const std::vector<std::string>& modality_names() const { return names_; }
  Eigen::Index input_dim(std::size_t m) const { return feature_[m].in_dim(); }
  bool shared_spatial() const { return spatial_.size() == 1; }

  /// Throws CheckpointError if `dataset` does not match the model's modalities.
  void check_compatible(const SpotDataset& dataset) const;

  ForwardResult forward(const ParamSet& params, const SpotDataset& dataset, const GraphSet& graphs) const;

  /// Total loss; when `grads` is non-null it receives the full analytic
  /// gradient (zeroed first).
  double loss(const ParamSet& params, const SpotDataset& dataset, const GraphSet& graphs, Gradients* grads,
              LossBreakdown* breakdown = nullptr, ForwardResult* forward_out = nullptr) const;

 private:
  struct Caches;
  ForwardResult run(const ParamSet& params, const SpotDataset& dataset, const GraphSet& graphs, Caches* caches) const;
  const KanGcn& spatial_encoder(std::size_t m) const { return spatial_[shared_spatial() ? 0 : m]; }
  const AttentionFusion& attention(std::size_t m) const { return attention_[attention_.size() == 1 ? 0 : m]; }

  TrainConfig config_;
  std::vector<std::string> names_;
  std::vector<KanGcn> spatial_;
  std::vector<KanGcn> feature_;
  std::vector<AttentionFusion> attention_;
  ParamSet::Id gate_ = 0;
  std::vector<Ffn> experts_;
  std::vector<KanLayer> decoders_;
};

}  // namespace grover
