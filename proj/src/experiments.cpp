#include "grover/experiments.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

namespace grover {

std::string mode_name(AblationMode mode) {
  switch (mode) {
    case AblationMode::full: return "full";
    case AblationMode::no_moe: return "no_moe";
    case AblationMode::no_contrast: return "no_contrast";
    case AblationMode::no_kan: return "no_kan";
  }
  return "?";
}

AblationMode parse_mode(const std::string& name) {
  for (AblationMode m : kAblationModes)
    if (mode_name(m) == name) return m;
  throw ArgumentError("unknown ablation mode '" + name + "' (expected full, no_moe, no_contrast or no_kan)");
}

TrainConfig apply_mode(TrainConfig base, AblationMode mode) {
  base.no_moe = mode == AblationMode::no_moe;
  base.no_contrast = mode == AblationMode::no_contrast;
  base.no_kan = mode == AblationMode::no_kan;
  return base;
}

CorruptionMask corruption_mask(const SyntheticDataset& synthetic) {
  if (synthetic.corrupted_spots.empty()) throw ArgumentError("synthetic dataset has no corrupted modality");
  CorruptionMask mask;
  mask.modality = synthetic.corrupted_spots[0].first;
  mask.corrupted.assign(static_cast<std::size_t>(synthetic.dataset.size()), false);
  for (Eigen::Index i : synthetic.corrupted_spots[0].second) mask.corrupted[static_cast<std::size_t>(i)] = true;
  return mask;
}

GateSummary summarize_gate(const GateDecision& decision, const std::vector<std::string>& modality_names,
                           const CorruptionMask& mask) {
  if (static_cast<Eigen::Index>(mask.corrupted.size()) != decision.size())
    throw ArgumentError("summarize_gate: mask length differs from gate rows");
  Eigen::Index col = -1;
  for (std::size_t m = 0; m < modality_names.size(); ++m)
    if (modality_names[m] == mask.modality) col = static_cast<Eigen::Index>(m);
  if (col < 0) throw ArgumentError("summarize_gate: no modality named '" + mask.modality + "'");

  GateSummary s;
  RowVector clean = RowVector::Zero(decision.weights.cols());
  double corrupted = 0.0;
  std::size_t n_clean = 0, n_corrupted = 0;
  for (Eigen::Index i = 0; i < decision.size(); ++i) {
    if (decision.fallback[static_cast<std::size_t>(i)]) ++s.fallback_count;
    if (mask.corrupted[static_cast<std::size_t>(i)]) {
      corrupted += decision.weights(i, col);
      ++n_corrupted;
    } else {
      clean += decision.weights.row(i);
      ++n_clean;
    }
  }
  if (n_clean) clean /= static_cast<double>(n_clean);
  s.clean_mean.assign(clean.data(), clean.data() + clean.size());
  s.corrupted_mean = n_corrupted ? corrupted / static_cast<double>(n_corrupted) : 0.0;
  return s;
}

RunOutcome run_once(const SpotDataset& dataset, const TrainConfig& config, int clusters,
                    const std::optional<CorruptionMask>& mask) {
  if (!dataset.labels) throw ArgumentError("experiment runs need ground-truth labels");
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult trained = train(dataset, config);
  EmbedResult e = embed(trained.model, trained.params, dataset, trained.graphs);
  RunOutcome out;
  out.config = config;
  out.metrics = external_metrics(kmeans(e.z, clusters, config.seed), *dataset.labels);
  if (mask && !config.no_moe) out.gate = summarize_gate(e.decision, dataset.modality_names(), *mask);
  out.final_loss = trained.log.epochs.empty() ? 0.0 : trained.log.epochs.back().total;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::pair<double, double> AblationRow::mean_std(double ExternalMetrics::*field) const {
  if (runs.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (const auto& r : runs) sum += r.metrics.*field;
  const double mean = sum / static_cast<double>(runs.size());
  double sq = 0.0;
  for (const auto& r : runs) sq += (r.metrics.*field - mean) * (r.metrics.*field - mean);
  return {mean, std::sqrt(sq / static_cast<double>(runs.size()))};
}

const AblationRow& AblationReport::row(AblationMode mode) const {
  for (const auto& r : rows)
    if (r.mode == mode) return r;
  throw ArgumentError("ablation report has no row '" + mode_name(mode) + "'");
}

namespace {

struct Column {
  const char* name;
  double ExternalMetrics::*field;
};

constexpr Column kReportColumns[] = {{"ARI", &ExternalMetrics::ari}, {"NMI", &ExternalMetrics::nmi},
                                     {"FMI", &ExternalMetrics::fmi}, {"AMI", &ExternalMetrics::ami},
                                     {"Jaccard", &ExternalMetrics::jaccard}, {"Purity", &ExternalMetrics::purity}};

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string AblationReport::to_csv() const {
  std::ostringstream out;
  out << "mode,runs";
  for (const auto& c : kReportColumns) out << ',' << c.name << "_mean," << c.name << "_std";
  out << ",corrupted_weight";
  out << "\n";
  for (const auto& r : rows) {
    out << mode_name(r.mode) << ',' << r.runs.size();
    for (const auto& c : kReportColumns) {
      auto [m, s] = r.mean_std(c.field);
      out << ',' << format_double(m) << ',' << format_double(s);
    }
    double w = 0.0;
    std::size_t n = 0;
    for (const auto& run : r.runs)
      if (run.gate) {
        w += run.gate->corrupted_mean;
        ++n;
      }
    out << ',' << (n ? format_double(w / static_cast<double>(n)) : std::string("NA")) << "\n";
  }
  return out.str();
}

std::string AblationReport::to_text() const {
  std::ostringstream out;
  out << "mode          ";
  for (const auto& c : kReportColumns) out << "  " << c.name << std::string(16 - std::string(c.name).size(), ' ');
  out << "\n";
  for (const auto& r : rows) {
    const std::string name = mode_name(r.mode);
    out << name << std::string(14 - name.size(), ' ');
    for (const auto& c : kReportColumns) {
      auto [m, s] = r.mean_std(c.field);
      out << "  " << fixed(m) << " +- " << fixed(s) << "  ";
    }
    out << "\n";
  }
  return out.str();
}

AblationReport run_ablation(const SpotDataset& dataset, const TrainConfig& base, const std::vector<AblationMode>& modes,
                            const std::vector<std::uint64_t>& seeds, int clusters,
                            const std::optional<CorruptionMask>& mask) {
  if (modes.empty()) throw ArgumentError("ablation needs at least one mode");
  if (seeds.empty()) throw ArgumentError("ablation needs at least one seed");
  AblationReport report;
  report.seeds = seeds;
  for (AblationMode mode : modes) {
    AblationRow row{mode, {}};
    for (std::uint64_t seed : seeds) {
      TrainConfig c = apply_mode(base, mode);
      c.seed = seed;
      row.runs.push_back(run_once(dataset, c, clusters, mask));
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string SweepReport::to_csv() const {
  std::ostringstream out;
  out << param << ",ARI,NMI,FMI,final_loss\n";
  for (const auto& r : rows)
    out << format_double(r.value) << ',' << format_double(r.outcome.metrics.ari) << ','
        << format_double(r.outcome.metrics.nmi) << ',' << format_double(r.outcome.metrics.fmi) << ','
        << format_double(r.outcome.final_loss) << "\n";
  return out.str();
}

std::string SweepReport::to_text() const {
  std::ostringstream out;
  out << param << std::string(param.size() < 8 ? 8 - param.size() : 1, ' ') << "  ARI     NMI     FMI\n";
  for (const auto& r : rows) {
    const std::string v = format_double(r.value);
    out << v << std::string(v.size() < 8 ? 8 - v.size() : 1, ' ') << "  " << fixed(r.outcome.metrics.ari) << "  "
        << fixed(r.outcome.metrics.nmi) << "  " << fixed(r.outcome.metrics.fmi) << "\n";
  }
  return out.str();
}

SweepReport run_sweep(const SpotDataset& dataset, const TrainConfig& base, const std::string& param,
                      const std::vector<double>& values, int clusters) {
  if (param != "gamma" && param != "lambda")
    throw ArgumentError("sweep parameter must be gamma or lambda, got '" + param + "'");
  if (values.empty()) throw ArgumentError("sweep needs at least one value");
  SweepReport report;
  report.param = param;
  for (double v : values) {
    TrainConfig c = base;
    if (param == "gamma") c.gamma = v;
    else c.lambda = v;
    c.validate();
    report.rows.push_back({v, run_once(dataset, c, clusters)});
  }
  return report;
}

}  // namespace grover
