#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "grover/common.hpp"

namespace grover {

/// Lloyd's algorithm from k-means++ seeding, best of `restarts` runs by
/// within-cluster sum of squares. Labels are 0..k-1.
std::vector<int> kmeans(const Matrix& z, int k, std::uint64_t seed, int restarts = 10, int max_iter = 300);

/// Within-cluster sum of squared distances to cluster means.
double within_sse(const Matrix& z, const std::vector<int>& labels);

struct ExternalMetrics {
  double ari = 0.0;
  double nmi = 0.0;
  double ami = 0.0;
  double fmi = 0.0;
  double jaccard = 0.0;
  double purity = 0.0;
};

struct InternalMetrics {
  double sc = 0.0;
  double chi = 0.0;
  double dbi = 0.0;
};

/// Contingency-table agreement scores. NMI and AMI use the arithmetic mean of
/// the two entropies. When neither labeling has any co-clustered pair, the
/// pair-counting scores (ARI, FMI, Jaccard) are 1 iff the labelings agree.
ExternalMetrics external_metrics(const std::vector<int>& pred, const std::vector<int>& truth);

/// Silhouette (euclidean; singleton clusters score 0), Calinski-Harabasz and
/// Davies-Bouldin. CHI is 0 when the between-cluster dispersion vanishes and
/// +inf when only the within-cluster dispersion does. Cluster pairs with
/// coincident centroids are skipped in DBI.
InternalMetrics internal_metrics(const Matrix& z, const std::vector<int>& pred);

inline constexpr std::array<const char*, 9> kMetricNames{"ARI", "NMI", "FMI", "SC", "AMI",
                                                         "Jaccard", "CHI", "Purity", "DBI"};

struct EvalRow {
  int clusters = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignments;
  std::optional<ExternalMetrics> external;
  InternalMetrics internal;

  /// Values in kMetricNames order; external entries are NaN without labels.
  std::array<double, 9> values() const;
};

struct EvalReport {
  std::vector<int> cluster_counts;
  std::vector<EvalRow> rows;
  bool has_truth = false;

  /// Names of the metrics present in this report.
  std::vector<std::string> metric_names() const;
  double metric(const EvalRow& row, const std::string& name) const;
  /// Mean and population standard deviation over rows.
  std::pair<double, double> aggregate(const std::string& name) const;

  std::string to_text() const;
  /// One row per cluster count plus `mean` and `std` rows; DBI also as x100.
  std::string to_csv() const;
};

/// k-means at each count (seed derived per count from `seed`), then all
/// metrics. Without `truth` only the internal metrics are reported.
EvalReport evaluate(const Matrix& z, const std::optional<std::vector<int>>& truth, const std::vector<int>& counts,
                    std::uint64_t seed);

}  // namespace grover
