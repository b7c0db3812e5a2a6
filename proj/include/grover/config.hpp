#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace grover {

struct TrainConfig {
  int epochs = 300;
  double lr = 1e-3;
  double lambda = 2.0;
  double gamma = 0.3;
  double tau = 0.5;
  double delta = 0.9;
  int k_spatial = 6;
  int k_feature = 20;
  int encoder_layers = 2;
  int d_hidden = 64;
  int d_latent = 64;
  int d_att = 32;
  int grid_size = 8;
  std::uint64_t seed = 0;
  bool share_spatial_encoder = true;
  bool share_attention = false;
  bool no_moe = false;
  bool no_contrast = false;
  bool no_kan = false;

  /// Expert FFN hidden width.
  int expert_hidden() const { return 2 * d_latent; }

  void validate() const;

  /// Every field as key -> text, keys in a fixed order.
  std::vector<std::pair<std::string, std::string>> to_pairs() const;

  /// Apply `key = value` overrides; unknown keys throw ConfigError.
  void set(const std::string& key, const std::string& value);
  void apply(const std::map<std::string, std::string>& values);

  static std::vector<std::string> keys();
};

/// Flat `key = value` text file; `#` starts a comment line.
std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path);

TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace grover
