#include "grover/trainer.hpp"

#include <fstream>

namespace grover {

std::vector<std::string> TrainingLog::columns() const {
  std::vector<std::string> c{"epoch"};
  for (const auto& m : modalities) c.push_back("rec_" + m);
  for (std::size_t a = 0; a < modalities.size(); ++a)
    for (std::size_t b = a + 1; b < modalities.size(); ++b) c.push_back("contrast_" + modalities[a] + "_" + modalities[b]);
  c.push_back("total");
  return c;
}

void TrainingLog::write_csv(const std::filesystem::path& path, const std::string& comment) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  if (!comment.empty()) out << "# " << comment << "\n";
  const auto cols = columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  for (const auto& r : epochs) {
    out << r.epoch;
    for (double v : r.reconstruction) out << ',' << format_double(v);
    for (double v : r.contrast) out << ',' << format_double(v);
    out << ',' << format_double(r.total) << "\n";
  }
}

TrainResult train(const SpotDataset& dataset, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  dataset.validate();
  if (dataset.num_modalities() < 2)
    throw ConfigError("training needs at least two modalities, dataset has " + std::to_string(dataset.num_modalities()));

  TrainResult result;
  result.graphs = build_graphs(dataset, config);
  result.model = GroverModel::initialize(config, dataset, result.graphs, result.params);
  result.log.modalities = dataset.modality_names();

  AdamState state = make_adam_state(result.params);
  const AdamOptions adam{config.lr};
  Gradients grads;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    LossBreakdown b;
    result.model.loss(result.params, dataset, result.graphs, &grads, &b);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.reconstruction = b.reconstruction;
    for (const auto& p : b.contrast) rec.contrast.push_back(p.value);
    rec.total = b.total;
    for (std::size_t m = 0; m < rec.reconstruction.size(); ++m)
      if (!std::isfinite(rec.reconstruction[m]))
        throw TrainingError("epoch " + std::to_string(epoch) + ": non-finite reconstruction loss for modality '" +
                            result.log.modalities[m] + "'");
    for (const auto& p : b.contrast)
      if (!std::isfinite(p.value))
        throw TrainingError("epoch " + std::to_string(epoch) + ": non-finite contrastive loss for pair '" +
                            result.log.modalities[p.first] + "'-'" + result.log.modalities[p.second] + "'");
    if (!std::isfinite(rec.total)) throw TrainingError("epoch " + std::to_string(epoch) + ": non-finite total loss");
    try {
      adam_step(result.params, grads, state, adam);
    } catch (const TrainingError& e) {
      throw TrainingError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (on_epoch) on_epoch(rec);
    result.log.epochs.push_back(std::move(rec));
  }
  return result;
}

EmbedResult embed(const GroverModel& model, const ParamSet& params, const SpotDataset& dataset,
                  const GraphSet& graphs) {
  ForwardResult f = model.forward(params, dataset, graphs);
  return {std::move(f.fused.z), std::move(f.decision), std::move(f.embeddings)};
}

std::map<std::string, std::string> checkpoint_meta(const GroverModel& model) {
  std::map<std::string, std::string> meta;
  for (const auto& [k, v] : model.config().to_pairs()) meta["config." + k] = v;
  std::string names;
  for (std::size_t m = 0; m < model.modality_names().size(); ++m) {
    names += (m ? "," : "") + model.modality_names()[m];
    meta["width." + model.modality_names()[m]] = std::to_string(model.input_dim(m));
  }
  meta["modalities"] = names;
  return meta;
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  LoadedModel out;
  out.params = load_checkpoint(checkpoint, &out.meta);
  TrainConfig config;
  for (const auto& [k, v] : out.meta)
    if (k.rfind("config.", 0) == 0) config.set(k.substr(7), v);
  auto it = out.meta.find("modalities");
  if (it == out.meta.end()) throw CheckpointError(checkpoint.string() + ": no modality list");
  std::vector<std::string> names;
  std::string cur;
  for (char c : it->second + ",") {
    if (c == ',') {
      if (!cur.empty()) names.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.model = GroverModel::attach(config, names, out.params);
  return out;
}

}  // namespace grover
