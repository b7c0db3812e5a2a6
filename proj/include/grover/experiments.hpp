#pragma once

#include <optional>
#include <string>
#include <vector>

#include "grover/evaluation.hpp"
#include "grover/trainer.hpp"

namespace grover {

/// Ablation configurations: the full model and the three single-component removals.
enum class AblationMode { full, no_moe, no_contrast, no_kan };

inline constexpr AblationMode kAblationModes[] = {AblationMode::full, AblationMode::no_moe, AblationMode::no_contrast,
                                                  AblationMode::no_kan};

std::string mode_name(AblationMode mode);
AblationMode parse_mode(const std::string& name);

/// `base` with the mode's flag set and the other ablation flags cleared.
TrainConfig apply_mode(TrainConfig base, AblationMode mode);

/// Per-spot membership of one modality's corrupted rows.
struct CorruptionMask {
  std::string modality;
  std::vector<bool> corrupted;  // size N
};

/// Mean gate weights split by corruption status.
struct GateSummary {
  std::vector<double> clean_mean;   // per modality, over uncorrupted spots
  double corrupted_mean = 0.0;      // corrupted modality's weight over corrupted spots
  std::size_t fallback_count = 0;
};

GateSummary summarize_gate(const GateDecision& decision, const std::vector<std::string>& modality_names,
                           const CorruptionMask& mask);

CorruptionMask corruption_mask(const SyntheticDataset& synthetic);

struct RunOutcome {
  TrainConfig config;
  ExternalMetrics metrics;  // k-means at `clusters` against the dataset labels
  std::optional<GateSummary> gate;
  double final_loss = 0.0;
  double seconds = 0.0;
};

/// Train, embed and cluster once. Requires labels.
RunOutcome run_once(const SpotDataset& dataset, const TrainConfig& config, int clusters,
                    const std::optional<CorruptionMask>& mask = std::nullopt);

struct AblationRow {
  AblationMode mode;
  std::vector<RunOutcome> runs;  // one per seed

  std::pair<double, double> mean_std(double ExternalMetrics::*field) const;
};

struct AblationReport {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;

  const AblationRow& row(AblationMode mode) const;
  std::string to_csv() const;
  std::string to_text() const;
};

/// Every mode over every training seed on one dataset.
AblationReport run_ablation(const SpotDataset& dataset, const TrainConfig& base, const std::vector<AblationMode>& modes,
                            const std::vector<std::uint64_t>& seeds, int clusters,
                            const std::optional<CorruptionMask>& mask = std::nullopt);

struct SweepRow {
  double value = 0.0;
  RunOutcome outcome;
};

struct SweepReport {
  std::string param;
  std::vector<SweepRow> rows;

  std::string to_csv() const;
  std::string to_text() const;
};

/// Vary `param` ("gamma" or "lambda") over `values`, one training run each.
SweepReport run_sweep(const SpotDataset& dataset, const TrainConfig& base, const std::string& param,
                      const std::vector<double>& values, int clusters);

}  // namespace grover
