#include "grover/model.hpp"

#include <algorithm>

namespace grover {

GraphSet build_graphs(const SpotDataset& dataset, const TrainConfig& config) {
  const Eigen::Index n = dataset.size();
  if (n < 2) throw ArgumentError("build_graphs: need at least two spots");
  GraphSet g;
  g.spatial = normalize(knn_graph(dataset.coords, std::min<Eigen::Index>(config.k_spatial, n - 1), Metric::euclidean));
  for (const auto& m : dataset.modalities)
    g.feature.push_back(
        normalize(knn_graph(m.features, std::min<Eigen::Index>(config.k_feature, n - 1), Metric::cosine)));
  return g;
}

struct GroverModel::Caches {
  std::vector<KanGcnCache> spatial;
  std::vector<KanGcnCache> feature;
  std::vector<AttentionCache> attention;
  std::vector<FfnCache> experts;
  std::vector<KanCache> decoders;
};

namespace {

std::vector<Eigen::Index> encoder_dims(Eigen::Index in, const TrainConfig& c) {
  std::vector<Eigen::Index> dims{in};
  for (int l = 0; l + 1 < c.encoder_layers; ++l) dims.push_back(c.d_hidden);
  dims.push_back(c.d_latent);
  return dims;
}

}  // namespace

GroverModel GroverModel::initialize(const TrainConfig& config, const SpotDataset& dataset, const GraphSet& graphs,
                                    ParamSet& params) {
  config.validate();
  dataset.validate();
  if (dataset.num_modalities() < 1) throw ConfigError("model needs at least one modality");
  if (graphs.feature.size() != dataset.num_modalities() || graphs.spatial.n != dataset.size())
    throw ConfigError("graphs do not match dataset");
  if (params.size() != 0) throw ConfigError("initialize expects an empty parameter set");

  GroverModel model;
  model.config_ = config;
  model.names_ = dataset.modality_names();
  const SplineGrid grid(config.grid_size);
  Rng rng(config.seed);
  const auto& mods = dataset.modalities;

  const bool same_width = std::all_of(mods.begin(), mods.end(), [&](const Modality& m) {
    return m.features.cols() == mods[0].features.cols();
  });
  if (config.share_spatial_encoder && same_width) {
    model.spatial_.emplace_back(params, "enc.spatial", encoder_dims(mods[0].features.cols(), config), grid, rng);
  } else {
    for (const auto& m : mods)
      model.spatial_.emplace_back(params, "enc.spatial." + m.name, encoder_dims(m.features.cols(), config), grid, rng);
  }
  for (const auto& m : mods)
    model.feature_.emplace_back(params, "enc.feature." + m.name, encoder_dims(m.features.cols(), config), grid, rng);
  if (config.share_attention) {
    model.attention_.emplace_back(params, "att", config.d_latent, config.d_att, rng);
  } else {
    for (const auto& m : mods) model.attention_.emplace_back(params, "att." + m.name, config.d_latent, config.d_att, rng);
  }
  const auto num_mods = static_cast<Eigen::Index>(mods.size());
  model.gate_ = params.add("gate.w", random_uniform(config.d_latent, num_mods,
                                                    1.0 / std::sqrt(static_cast<double>(config.d_latent)), rng));
  for (const auto& m : mods) model.experts_.emplace_back(params, "expert." + m.name, config.d_latent, config.expert_hidden(), rng);
  for (const auto& m : mods)
    model.decoders_.emplace_back(params, "dec." + m.name, config.d_latent, m.features.cols(), grid, rng);

  if (config.no_kan) {
    for (ParamSet::Id id = 0; id < params.size(); ++id)
      if (params.name(id).ends_with(".spline")) params.set_trainable(id, false);
  }

  // First forward pass: freeze normalization statistics front to back.
  if (model.shared_spatial()) {
    std::vector<std::pair<const SparseAdjacency*, const Matrix*>> runs;
    for (const auto& m : mods) runs.emplace_back(&graphs.spatial, &m.features);
    model.spatial_[0].calibrate(params, runs);
  } else {
    for (std::size_t m = 0; m < mods.size(); ++m) model.spatial_[m].calibrate(params, {{&graphs.spatial, &mods[m].features}});
  }
  for (std::size_t m = 0; m < mods.size(); ++m) model.feature_[m].calibrate(params, {{&graphs.feature[m], &mods[m].features}});
  const ForwardResult first = model.run(params, dataset, graphs, nullptr);
  for (const auto& dec : model.decoders_) dec.calibrate(params, first.fused.z);
  return model;
}

GroverModel GroverModel::attach(const TrainConfig& config, const std::vector<std::string>& modality_names,
                                const ParamSet& params) {
  config.validate();
  GroverModel model;
  model.config_ = config;
  model.names_ = modality_names;
  const SplineGrid grid(config.grid_size);
  const auto layers = static_cast<std::size_t>(config.encoder_layers);
  if (params.contains("enc.spatial.l0.linear")) {
    model.spatial_.emplace_back(params, "enc.spatial", layers, grid);
  } else {
    for (const auto& n : modality_names) model.spatial_.emplace_back(params, "enc.spatial." + n, layers, grid);
  }
  for (const auto& n : modality_names) model.feature_.emplace_back(params, "enc.feature." + n, layers, grid);
  if (params.contains("att.w")) {
    model.attention_.emplace_back(params, "att");
  } else {
    for (const auto& n : modality_names) model.attention_.emplace_back(params, "att." + n);
  }
  model.gate_ = params.id("gate.w");
  for (const auto& n : modality_names) model.experts_.emplace_back(params, "expert." + n);
  for (const auto& n : modality_names) model.decoders_.emplace_back(params, "dec." + n, grid);
  if (params[model.gate_].rows() != config.d_latent ||
      params[model.gate_].cols() != static_cast<Eigen::Index>(modality_names.size()))
    throw CheckpointError("gate matrix shape does not match config");
  for (std::size_t m = 0; m < modality_names.size(); ++m) {
    if (model.spatial_encoder(m).out_dim() != config.d_latent || model.feature_[m].out_dim() != config.d_latent ||
        model.decoders_[m].in_dim() != config.d_latent || model.experts_[m].dim() != config.d_latent)
      throw CheckpointError("tensor widths do not match config d_latent for modality '" + modality_names[m] + "'");
  }
  return model;
}

void GroverModel::check_compatible(const SpotDataset& dataset) const {
  if (dataset.modality_names() != names_) throw CheckpointError("dataset modalities differ from the model's");
  for (std::size_t m = 0; m < names_.size(); ++m) {
    const Eigen::Index d = dataset.modalities[m].features.cols();
    if (feature_[m].in_dim() != d || spatial_encoder(m).in_dim() != d || decoders_[m].out_dim() != d)
      throw CheckpointError("modality '" + names_[m] + "' has width " + std::to_string(d) +
                            " but the model expects " + std::to_string(feature_[m].in_dim()));
  }
}

ForwardResult GroverModel::run(const ParamSet& params, const SpotDataset& dataset, const GraphSet& graphs,
                               Caches* caches) const {
  const std::size_t mods = names_.size();
  const bool spline = !config_.no_kan;
  if (caches) {
    caches->spatial.assign(mods, {});
    caches->feature.assign(mods, {});
    caches->attention.assign(mods, {});
    caches->experts.assign(mods, {});
    caches->decoders.assign(mods, {});
  }
  ForwardResult out;
  for (std::size_t m = 0; m < mods; ++m) {
    const Matrix& x = dataset.modalities[m].features;
    Matrix es = spatial_encoder(m).forward(params, graphs.spatial, x, caches ? &caches->spatial[m] : nullptr, spline);
    Matrix ef = feature_[m].forward(params, graphs.feature[m], x, caches ? &caches->feature[m] : nullptr, spline);
    out.embeddings.push_back(attention(m).forward(params, es, ef, caches ? &caches->attention[m] : nullptr));
  }
  std::vector<Matrix> h;
  for (std::size_t m = 0; m < mods; ++m)
    h.push_back(experts_[m].forward(params, out.embeddings[m].fused, caches ? &caches->experts[m] : nullptr));
  if (config_.no_moe) {
    out.fused = combine(std::move(h), Matrix::Ones(dataset.size(), static_cast<Eigen::Index>(mods)));
  } else {
    std::vector<const Matrix*> e;
    for (const auto& emb : out.embeddings) e.push_back(&emb.fused);
    out.decision = gate(e, params[gate_], config_.gamma);
    out.fused = combine(std::move(h), out.decision.weights);
  }
  for (std::size_t m = 0; m < mods; ++m)
    out.reconstructions.push_back(
        decode(params, out.fused.z, graphs.spatial, decoders_[m], caches ? &caches->decoders[m] : nullptr, spline));
  return out;
}

ForwardResult GroverModel::forward(const ParamSet& params, const SpotDataset& dataset, const GraphSet& graphs) const {
  check_compatible(dataset);
  return run(params, dataset, graphs, nullptr);
}

double GroverModel::loss(const ParamSet& params, const SpotDataset& dataset, const GraphSet& graphs,
                         Gradients* grads, LossBreakdown* breakdown, ForwardResult* forward_out) const {
  check_compatible(dataset);
  const std::size_t mods = names_.size();
  const bool spline = !config_.no_kan;
  const double lambda = config_.no_contrast ? 0.0 : config_.lambda;
  Caches caches;
  ForwardResult fwd = run(params, dataset, graphs, grads ? &caches : nullptr);

  LossBreakdown b;
  std::vector<Matrix> d_recon(mods);
  for (std::size_t m = 0; m < mods; ++m)
    b.reconstruction.push_back(reconstruction_loss(dataset.modalities[m].features, fwd.reconstructions[m],
                                                   grads ? &d_recon[m] : nullptr));
  std::vector<const Matrix*> fused_ptrs;
  for (const auto& emb : fwd.embeddings) fused_ptrs.push_back(&emb.fused);
  std::vector<Matrix> d_fused;
  for (const auto& emb : fwd.embeddings) d_fused.push_back(Matrix::Zero(emb.fused.rows(), emb.fused.cols()));
  const bool contrast_grad = grads && lambda > 0.0;
  ContrastiveResult contrast = pairwise_contrastive(fused_ptrs, config_.delta, config_.tau, contrast_grad ? &d_fused : nullptr);
  b.contrast = contrast.pairs;
  b.contrast_total = contrast.total;
  b.total = total_loss(b.reconstruction, contrast.total, lambda);

  if (grads) {
    *grads = params.zeros_like();
    Gradients& g = *grads;
    if (contrast_grad)
      for (auto& d : d_fused) d *= lambda;

    Matrix d_z = Matrix::Zero(fwd.fused.z.rows(), fwd.fused.z.cols());
    for (std::size_t m = 0; m < mods; ++m) {
      const Matrix d_transformed = spmm(graphs.spatial, d_recon[m]);
      d_z += decoders_[m].backward(params, caches.decoders[m], d_transformed, g, true, spline);
    }

    const Eigen::Index num = static_cast<Eigen::Index>(mods);
    std::vector<Matrix> d_expert(mods);
    if (config_.no_moe) {
      for (auto& d : d_expert) d = d_z;
    } else {
      const Matrix& w = fwd.decision.weights;
      Matrix d_weights(d_z.rows(), num);
      for (std::size_t m = 0; m < mods; ++m) {
        const auto k = static_cast<Eigen::Index>(m);
        d_expert[m] = w.col(k).asDiagonal() * d_z;
        d_weights.col(k) = d_z.cwiseProduct(fwd.fused.expert_outputs[m]).rowwise().sum();
      }
      gate_backward(fwd.decision, params[gate_], d_weights, g[gate_], d_fused);
    }
    for (std::size_t m = 0; m < mods; ++m) d_fused[m] += experts_[m].backward(params, caches.experts[m], d_expert[m], g);

    for (std::size_t m = 0; m < mods; ++m) {
      auto [d_spatial, d_feature] =
          attention(m).backward(params, fwd.embeddings[m], caches.attention[m], d_fused[m], g);
      spatial_encoder(m).backward(params, graphs.spatial, caches.spatial[m], d_spatial, g, spline);
      feature_[m].backward(params, graphs.feature[m], caches.feature[m], d_feature, g, spline);
    }
    if (config_.no_kan) {
      for (ParamSet::Id id = 0; id < params.size(); ++id)
        if (!params.trainable(id)) g[id].setZero();
    }
  }
  const double total = b.total;
  if (breakdown) *breakdown = std::move(b);
  if (forward_out) *forward_out = std::move(fwd);
  return total;
}

}  // namespace grover
