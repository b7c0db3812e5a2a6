#include "grover/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace grover {

namespace {

// Relabel to 0..c-1 in order of first appearance.
std::vector<int> compact(const std::vector<int>& labels, int* count) {
  std::map<int, int> ids;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = ids.emplace(labels[i], static_cast<int>(ids.size()));
    out[i] = it->second;
  }
  *count = static_cast<int>(ids.size());
  return out;
}

double comb2(double n) { return n * (n - 1.0) / 2.0; }

double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0) h -= (c / n) * std::log(c / n);
  return h;
}

struct LloydResult {
  std::vector<int> labels;
  double sse = 0.0;
};

LloydResult lloyd(const Matrix& z, int k, Rng& rng, int max_iter) {
  const Eigen::Index n = z.rows();
  Matrix centers(k, z.cols());

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  Eigen::Index first = static_cast<Eigen::Index>(rng.below(n));
  for (int c = 0; c < k; ++c) {
    Eigen::Index pick = first;
    if (c > 0) {
      double total = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) total += d2[i];
      pick = -1;
      if (total > 0) {
        const double r = rng.uniform() * total;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (d2[i] <= 0) continue;
          acc += d2[i];
          pick = i;
          if (acc > r) break;
        }
      } else {
        for (Eigen::Index i = 0; i < n && pick < 0; ++i)
          if (!chosen[i]) pick = i;
      }
    }
    chosen[pick] = true;
    centers.row(c) = z.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], (z.row(i) - centers.row(c)).squaredNorm());
  }

  std::vector<int> labels(n, -1);
  std::vector<double> dist(n, 0.0);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (z.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (z.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      dist[i] = best_d;
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;

    Matrix sums = Matrix::Zero(k, z.cols());
    std::vector<Eigen::Index> sizes(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[i]) += z.row(i);
      ++sizes[labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(sizes[c]);
        continue;
      }
      // Empty cluster: take over the point farthest from its center.
      Eigen::Index far = 0;
      for (Eigen::Index i = 1; i < n; ++i)
        if (dist[i] > dist[far]) far = i;
      centers.row(c) = z.row(far);
      dist[far] = 0.0;
    }
  }
  LloydResult r{std::move(labels), 0.0};
  r.sse = within_sse(z, r.labels);
  return r;
}

}  // namespace

std::vector<int> kmeans(const Matrix& z, int k, std::uint64_t seed, int restarts, int max_iter) {
  if (k < 2 || k > z.rows())
    throw ArgumentError("kmeans: k must be in [2, " + std::to_string(z.rows()) + "], got " + std::to_string(k));
  if (restarts < 1 || max_iter < 1) throw ArgumentError("kmeans: restarts and max_iter must be positive");
  Rng rng(seed);
  LloydResult best;
  best.sse = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    LloydResult cur = lloyd(z, k, rng, max_iter);
    if (cur.sse < best.sse) best = std::move(cur);
  }
  return best.labels;
}

double within_sse(const Matrix& z, const std::vector<int>& labels) {
  int k = 0;
  const auto lab = compact(labels, &k);
  Matrix means = Matrix::Zero(k, z.cols());
  std::vector<double> sizes(k, 0.0);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    means.row(lab[i]) += z.row(i);
    sizes[lab[i]] += 1.0;
  }
  for (int c = 0; c < k; ++c) means.row(c) /= sizes[c];
  double sse = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) sse += (z.row(i) - means.row(lab[i])).squaredNorm();
  return sse;
}

ExternalMetrics external_metrics(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size())
    throw ArgumentError("external_metrics: " + std::to_string(pred.size()) + " predictions vs " +
                        std::to_string(truth.size()) + " reference labels");
  if (pred.empty()) throw ArgumentError("external_metrics: empty labelings");
  int kp = 0, kt = 0;
  const auto p = compact(pred, &kp);
  const auto t = compact(truth, &kt);
  const double n = static_cast<double>(p.size());

  Matrix table = Matrix::Zero(kp, kt);
  for (std::size_t i = 0; i < p.size(); ++i) table(p[i], t[i]) += 1.0;
  std::vector<double> a(kp), b(kt);
  for (int i = 0; i < kp; ++i) a[i] = table.row(i).sum();
  for (int j = 0; j < kt; ++j) b[j] = table.col(j).sum();

  ExternalMetrics m;

  // Pair counting.
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < kp; ++i)
    for (int j = 0; j < kt; ++j) sum_ij += comb2(table(i, j));
  for (double v : a) sum_a += comb2(v);
  for (double v : b) sum_b += comb2(v);
  const double total_pairs = comb2(n);
  const double expected = total_pairs > 0 ? sum_a * sum_b / total_pairs : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  m.ari = max_index == expected ? 1.0 : (sum_ij - expected) / (max_index - expected);
  if (sum_a == 0.0 && sum_b == 0.0) {
    m.fmi = 1.0;
  } else if (sum_a == 0.0 || sum_b == 0.0) {
    m.fmi = 0.0;
  } else {
    m.fmi = sum_ij / std::sqrt(sum_a * sum_b);
  }
  const double union_pairs = sum_a + sum_b - sum_ij;
  m.jaccard = union_pairs == 0.0 ? 1.0 : sum_ij / union_pairs;

  // Information theoretic.
  const double ha = entropy(a, n), hb = entropy(b, n);
  double mi = 0.0;
  for (int i = 0; i < kp; ++i)
    for (int j = 0; j < kt; ++j) {
      const double c = table(i, j);
      if (c > 0) mi += (c / n) * std::log(n * c / (a[i] * b[j]));
    }
  mi = std::max(mi, 0.0);
  const double mean_h = 0.5 * (ha + hb);
  if ((kp == 1 && kt == 1)) {
    m.nmi = 1.0;
    m.ami = 1.0;
  } else {
    m.nmi = mean_h > 0 ? mi / mean_h : 0.0;
    double emi = 0.0;
    const double lg_n1 = std::lgamma(n + 1.0);
    for (int i = 0; i < kp; ++i)
      for (int j = 0; j < kt; ++j) {
        const double ai = a[i], bj = b[j];
        const double lo = std::max(1.0, ai + bj - n), hi = std::min(ai, bj);
        const double base = std::lgamma(ai + 1) + std::lgamma(bj + 1) + std::lgamma(n - ai + 1) +
                            std::lgamma(n - bj + 1) - lg_n1;
        for (double nij = lo; nij <= hi; nij += 1.0) {
          const double lw = base - std::lgamma(nij + 1) - std::lgamma(ai - nij + 1) - std::lgamma(bj - nij + 1) -
                            std::lgamma(n - ai - bj + nij + 1);
          emi += (nij / n) * std::log(n * nij / (ai * bj)) * std::exp(lw);
        }
      }
    double denom = mean_h - emi;
    const double tiny = std::numeric_limits<double>::epsilon();
    denom = denom < 0 ? std::min(denom, -tiny) : std::max(denom, tiny);
    m.ami = (mi - emi) / denom;
  }

  double majority = 0.0;
  for (int i = 0; i < kp; ++i) majority += table.row(i).maxCoeff();
  m.purity = majority / n;
  return m;
}

InternalMetrics internal_metrics(const Matrix& z, const std::vector<int>& pred) {
  if (static_cast<Eigen::Index>(pred.size()) != z.rows())
    throw ArgumentError("internal_metrics: " + std::to_string(pred.size()) + " labels for " +
                        std::to_string(z.rows()) + " points");
  int k = 0;
  const auto lab = compact(pred, &k);
  if (k < 2) throw ArgumentError("internal_metrics: need at least 2 clusters, got " + std::to_string(k));
  const Eigen::Index n = z.rows();

  std::vector<double> sizes(k, 0.0);
  Matrix centroids = Matrix::Zero(k, z.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    centroids.row(lab[i]) += z.row(i);
    sizes[lab[i]] += 1.0;
  }
  for (int c = 0; c < k; ++c) centroids.row(c) /= sizes[c];

  InternalMetrics m;

  // Silhouette.
  double sc_sum = 0.0;
  std::vector<double> per_cluster(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sizes[lab[i]] < 2) continue;
    std::fill(per_cluster.begin(), per_cluster.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) per_cluster[lab[j]] += (z.row(i) - z.row(j)).norm();
    const double a = per_cluster[lab[i]] / (sizes[lab[i]] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != lab[i]) b = std::min(b, per_cluster[c] / sizes[c]);
    const double den = std::max(a, b);
    sc_sum += den > 0 ? (b - a) / den : 0.0;
  }
  m.sc = sc_sum / static_cast<double>(n);

  // Calinski-Harabasz.
  const RowVector mean = z.colwise().mean();
  double between = 0.0, within = 0.0;
  for (int c = 0; c < k; ++c) between += sizes[c] * (centroids.row(c) - mean).squaredNorm();
  for (Eigen::Index i = 0; i < n; ++i) within += (z.row(i) - centroids.row(lab[i])).squaredNorm();
  if (between == 0.0) {
    m.chi = 0.0;
  } else if (within == 0.0) {
    m.chi = std::numeric_limits<double>::infinity();
  } else {
    m.chi = (between / within) * (static_cast<double>(n - k) / (k - 1));
  }

  // Davies-Bouldin.
  std::vector<double> spread(k, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) spread[lab[i]] += (z.row(i) - centroids.row(lab[i])).norm();
  for (int c = 0; c < k; ++c) spread[c] /= sizes[c];
  double dbi = 0.0;
  for (int c = 0; c < k; ++c) {
    double worst = 0.0;
    for (int o = 0; o < k; ++o) {
      if (o == c) continue;
      const double d = (centroids.row(c) - centroids.row(o)).norm();
      if (d > 0) worst = std::max(worst, (spread[c] + spread[o]) / d);
    }
    dbi += worst;
  }
  m.dbi = dbi / k;
  return m;
}

std::array<double, 9> EvalRow::values() const {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const ExternalMetrics e = external.value_or(ExternalMetrics{nan, nan, nan, nan, nan, nan});
  return {e.ari, e.nmi, e.fmi, internal.sc, e.ami, e.jaccard, internal.chi, e.purity, internal.dbi};
}

std::vector<std::string> EvalReport::metric_names() const {
  std::vector<std::string> names;
  for (const char* name : kMetricNames) {
    const std::string s(name);
    if (has_truth || s == "SC" || s == "CHI" || s == "DBI") names.push_back(s);
  }
  return names;
}

double EvalReport::metric(const EvalRow& row, const std::string& name) const {
  const auto values = row.values();
  for (std::size_t i = 0; i < kMetricNames.size(); ++i)
    if (name == kMetricNames[i]) return values[i];
  throw ArgumentError("unknown metric '" + name + "'");
}

std::pair<double, double> EvalReport::aggregate(const std::string& name) const {
  if (rows.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double sum = 0.0;
  for (const auto& r : rows) sum += metric(r, name);
  const double mean = sum / static_cast<double>(rows.size());
  double var = 0.0;
  for (const auto& r : rows) var += (metric(r, name) - mean) * (metric(r, name) - mean);
  return {mean, std::sqrt(var / static_cast<double>(rows.size()))};
}

std::string EvalReport::to_text() const {
  const auto names = metric_names();
  std::ostringstream out;
  out << "cluster_counts =";
  for (std::size_t i = 0; i < cluster_counts.size(); ++i) out << (i ? "," : " ") << cluster_counts[i];
  out << "\nlabels = " << (has_truth ? "yes" : "no") << "\n";
  for (const auto& name : names) {
    const auto [mean, sd] = aggregate(name);
    out << name << " = " << format_double(mean) << " +- " << format_double(sd) << "\n";
    if (name == "DBI") out << "DBIx100 = " << format_double(100 * mean) << " +- " << format_double(100 * sd) << "\n";
  }
  out << "\nk";
  for (const auto& name : names) out << '\t' << name;
  out << "\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.clusters;
    for (const auto& name : names) {
      std::snprintf(buf, sizeof buf, "\t%.4f", metric(r, name));
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

std::string EvalReport::to_csv() const {
  const auto names = metric_names();
  std::ostringstream out;
  out << "k";
  for (const auto& name : names) out << ',' << name;
  out << ",DBIx100\n";
  for (const auto& r : rows) {
    out << r.clusters;
    for (const auto& name : names) out << ',' << format_double(metric(r, name));
    out << ',' << format_double(100 * r.internal.dbi) << "\n";
  }
  for (int which = 0; which < 2; ++which) {
    out << (which == 0 ? "mean" : "std");
    for (const auto& name : names) {
      const auto agg = aggregate(name);
      out << ',' << format_double(which == 0 ? agg.first : agg.second);
    }
    const auto dbi = aggregate("DBI");
    out << ',' << format_double(100 * (which == 0 ? dbi.first : dbi.second)) << "\n";
  }
  return out.str();
}

EvalReport evaluate(const Matrix& z, const std::optional<std::vector<int>>& truth, const std::vector<int>& counts,
                    std::uint64_t seed) {
  if (counts.empty()) throw ArgumentError("evaluate: no cluster counts given");
  if (truth && static_cast<Eigen::Index>(truth->size()) != z.rows())
    throw ArgumentError("evaluate: " + std::to_string(truth->size()) + " reference labels for " +
                        std::to_string(z.rows()) + " spots");
  EvalReport report;
  report.cluster_counts = counts;
  report.has_truth = truth.has_value();
  for (int k : counts) {
    EvalRow row;
    row.clusters = k;
    row.seed = Rng::derive(seed, static_cast<std::uint64_t>(k));
    row.assignments = kmeans(z, k, row.seed);
    if (truth) row.external = external_metrics(row.assignments, *truth);
    row.internal = internal_metrics(z, row.assignments);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace grover
