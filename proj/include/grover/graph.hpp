#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "grover/common.hpp"

namespace grover {

struct Edge {
  Eigen::Index row;
  Eigen::Index col;
  double weight;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Symmetric sparse adjacency stored as a (row, col)-sorted edge list.
///
/// Unnormalized graphs are binary without self loops. A normalized graph holds
/// D^{-1/2}(A + I)D^{-1/2} including the diagonal.
struct SparseAdjacency {
  Eigen::Index n = 0;
  std::vector<Edge> entries;
  bool normalized = false;

  Matrix to_dense() const;
  bool has_edge(Eigen::Index i, Eigen::Index j) const;
  std::size_t num_undirected_edges() const;
};

enum class Metric { euclidean, cosine };

Metric parse_metric(const std::string& name);

/// Union-symmetrized k-nearest-neighbour graph. Distance ties resolve to the
/// smaller node index.
SparseAdjacency knn_graph(const Matrix& points, Eigen::Index k, Metric metric);

/// Returns D^{-1/2}(A + I)D^{-1/2}; throws StateError on already normalized input.
SparseAdjacency normalize(const SparseAdjacency& adj);

/// Sparse-dense product, accumulating each row's entries in column order.
template <typename Derived>
MatrixX<typename Derived::Scalar> spmm(const SparseAdjacency& adj, const Eigen::MatrixBase<Derived>& dense) {
  using Scalar = typename Derived::Scalar;
  if (dense.rows() != adj.n)
    throw ArgumentError("spmm: adjacency has " + std::to_string(adj.n) + " nodes, dense has " +
                        std::to_string(dense.rows()) + " rows");
  if (!adj.normalized) throw ArgumentError("spmm: adjacency must be normalized");
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(dense.rows(), dense.cols());
  for (const auto& e : adj.entries) out.row(e.row) += static_cast<Scalar>(e.weight) * dense.row(e.col);
  return out;
}

void write_edge_list(const std::filesystem::path& path, const SparseAdjacency& adj, const std::string& comment = {});

/// Spatial graph plus one feature graph per modality, all normalized.
struct GraphSet {
  SparseAdjacency spatial;
  std::vector<SparseAdjacency> feature;  // modality order
};

}  // namespace grover
