#include "grover/graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace grover {

Matrix SparseAdjacency::to_dense() const {
  Matrix d = Matrix::Zero(n, n);
  for (const auto& e : entries) d(e.row, e.col) = e.weight;
  return d;
}

bool SparseAdjacency::has_edge(Eigen::Index i, Eigen::Index j) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), std::pair{i, j}, [](const Edge& e, const auto& key) {
    return std::pair{e.row, e.col} < key;
  });
  return it != entries.end() && it->row == i && it->col == j;
}

std::size_t SparseAdjacency::num_undirected_edges() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const Edge& e) { return e.row < e.col; }));
}

Metric parse_metric(const std::string& name) {
  if (name == "euclidean") return Metric::euclidean;
  if (name == "cosine") return Metric::cosine;
  throw ArgumentError("unknown metric '" + name + "'");
}

SparseAdjacency knn_graph(const Matrix& points, Eigen::Index k, Metric metric) {
  const Eigen::Index n = points.rows();
  if (k < 1 || k >= n)
    throw ArgumentError("knn_graph: k=" + std::to_string(k) + " must satisfy 1 <= k < N=" + std::to_string(n));

  Matrix dist(n, n);
  if (metric == Metric::euclidean) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) dist(i, j) = (points.row(i) - points.row(j)).squaredNorm();
  } else {
    Matrix unit = points;
    for (Eigen::Index i = 0; i < n; ++i) unit.row(i) /= std::max(points.row(i).norm(), 1e-12);
    dist = (-(unit * unit.transpose())).array() + 1.0;
  }

  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < n; ++i) {
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::erase(order, i);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return dist(i, a) < dist(i, b) || (dist(i, a) == dist(i, b) && a < b);
    });
    for (Eigen::Index r = 0; r < k; ++r) {
      pairs.emplace_back(i, order[r]);
      pairs.emplace_back(order[r], i);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  SparseAdjacency adj;
  adj.n = n;
  adj.entries.reserve(pairs.size());
  for (auto [i, j] : pairs) adj.entries.push_back({i, j, 1.0});
  return adj;
}

SparseAdjacency normalize(const SparseAdjacency& adj) {
  if (adj.normalized) throw StateError("normalize: adjacency is already normalized");
  Vector degree = Vector::Ones(adj.n);
  for (const auto& e : adj.entries) {
    if (e.row == e.col) throw ArgumentError("normalize: raw adjacency must not contain self loops");
    degree(e.row) += e.weight;
  }
  std::vector<Edge> entries = adj.entries;
  for (Eigen::Index i = 0; i < adj.n; ++i) entries.push_back({i, i, 1.0});
  std::sort(entries.begin(), entries.end(),
            [](const Edge& a, const Edge& b) { return std::pair{a.row, a.col} < std::pair{b.row, b.col}; });
  SparseAdjacency out;
  out.n = adj.n;
  out.normalized = true;
  out.entries.reserve(entries.size());
  for (const auto& e : entries) {
    // Same expression for (i,j) and (j,i) up to operand order of a commutative product.
    const double lo = degree(std::min(e.row, e.col)), hi = degree(std::max(e.row, e.col));
    out.entries.push_back({e.row, e.col, e.weight / std::sqrt(lo * hi)});
  }
  return out;
}

void write_edge_list(const std::filesystem::path& path, const SparseAdjacency& adj, const std::string& comment) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "src,dst,weight\n";
  for (const auto& e : adj.entries) out << e.row << ',' << e.col << ',' << format_double(e.weight) << "\n";
}

}  // namespace grover
