#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "grover/model.hpp"
#include "grover/params.hpp"

namespace grover {

struct EpochRecord {
  int epoch = 0;
  std::vector<double> reconstruction;
  std::vector<double> contrast;
  double total = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainingLog {
  std::vector<std::string> modalities;
  std::vector<EpochRecord> epochs;

  /// Header: epoch,rec_<m>...,contrast_<a>_<b>...,total
  std::vector<std::string> columns() const;
  void write_csv(const std::filesystem::path& path, const std::string& comment = {}) const;
};

struct TrainResult {
  GroverModel model;
  ParamSet params;
  GraphSet graphs;
  TrainingLog log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Builds the graphs once, initializes parameters and runs `config.epochs`
/// full-batch Adam steps on the total loss.
TrainResult train(const SpotDataset& dataset, const TrainConfig& config, const EpochCallback& on_epoch = {});

struct EmbedResult {
  Matrix z;
  GateDecision decision;  // empty when the model fuses by summation
  std::vector<ModalityEmbeddings> embeddings;
};

EmbedResult embed(const GroverModel& model, const ParamSet& params, const SpotDataset& dataset,
                  const GraphSet& graphs);

/// Checkpoint metadata: resolved config, modality names and widths.
std::map<std::string, std::string> checkpoint_meta(const GroverModel& model);

struct LoadedModel {
  GroverModel model;
  ParamSet params;
  std::map<std::string, std::string> meta;
};

LoadedModel load_model(const std::filesystem::path& checkpoint);

}  // namespace grover
