#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "grover/common.hpp"

namespace grover {

struct Modality {
  std::string name;
  Matrix features;  // N x D_m
};

/// Spot-level multimodal dataset. Rows of every matrix follow spot_ids order.
struct SpotDataset {
  std::vector<std::string> spot_ids;
  Matrix coords;  // N x 2
  std::vector<Modality> modalities;
  std::optional<std::vector<int>> labels;

  Eigen::Index size() const { return static_cast<Eigen::Index>(spot_ids.size()); }
  std::size_t num_modalities() const { return modalities.size(); }

  const Modality& modality(const std::string& name) const;
  std::vector<std::string> modality_names() const;

  /// Checks shape agreement, unique names, D_m >= 1 and finiteness.
  void validate() const;

  /// Same dataset with rows reordered so that new row r is old row perm[r].
  SpotDataset permuted(const std::vector<Eigen::Index>& perm) const;
};

/// Canonical text serialization (coords, modalities, labels); equal datasets
/// serialize to identical bytes.
std::string serialize(const SpotDataset& ds);

/// Load a dataset from explicit files. Modality files ending in `.mtx` are read
/// as Matrix Market with a `<stem>.spots.txt` sidecar; anything else is dense CSV.
SpotDataset load_dataset(const std::filesystem::path& coords_path,
                         const std::vector<std::pair<std::string, std::filesystem::path>>& modality_paths,
                         const std::optional<std::filesystem::path>& labels_path = std::nullopt);

/// Load a dataset directory described by its `dataset.txt` index.
SpotDataset load_dataset_dir(const std::filesystem::path& dir);

/// Write coords.csv, <modality>.csv, labels.csv and the dataset.txt index.
/// `comment`, when nonempty, is written as a leading `# ...` line in each file.
void save_dataset(const SpotDataset& ds, const std::filesystem::path& dir, const std::string& comment = {});

// Low-level CSV helpers shared with the CLI.

struct DenseTable {
  std::vector<std::string> row_ids;
  std::vector<std::string> column_names;  // excludes the id column
  Matrix values;
};

DenseTable read_dense_csv(const std::filesystem::path& path);
void write_dense_csv(const std::filesystem::path& path, const std::string& id_header,
                     const std::vector<std::string>& column_names, const std::vector<std::string>& row_ids,
                     const Matrix& values, const std::string& comment = {});

/// Matrix Market coordinate file (real/integer/pattern, general/symmetric) plus
/// sidecar spot list; rows are spots.
DenseTable read_matrix_market(const std::filesystem::path& mtx_path);
void write_matrix_market(const std::filesystem::path& mtx_path, const std::vector<std::string>& row_ids,
                         const Matrix& values);

std::vector<int> read_labels_csv(const std::filesystem::path& path, std::vector<std::string>* ids = nullptr);

/// Top-k principal component scores of the column-centered matrix. Each
/// component is oriented so its largest-magnitude loading is positive.
Matrix pca_reduce(const Matrix& features, Eigen::Index k);

struct CorruptionSpec {
  std::string modality;
  double fraction = 0.0;
  double sigma = 0.0;
};

struct SyntheticSpec {
  Eigen::Index n_spots = 600;
  int n_domains = 4;
  Eigen::Index grid_side = 25;
  std::vector<std::pair<std::string, Eigen::Index>> dims{{"rna", 20}, {"adt", 20}, {"img", 20}};
  double noise_sigma = 1.0;
  std::vector<CorruptionSpec> corruption;

  void validate() const;
};

struct SyntheticDataset {
  SpotDataset dataset;
  /// Per corrupted modality, the sorted indices of overwritten spots.
  std::vector<std::pair<std::string, std::vector<Eigen::Index>>> corrupted_spots;
};

/// Lattice spots split into angular-sector domains with per-domain modality
/// means, Gaussian noise and optional per-modality corruption.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace grover
