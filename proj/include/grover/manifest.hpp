#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace grover {

/// Flat key-value record of one CLI run. The hash covers the `add` entries.
/// Notes (input paths) and the timestamp are written to the file but kept out
/// of the hash, so moving inputs around does not change it.
class Manifest {
 public:
  void add(const std::string& key, const std::string& value);
  void note(const std::string& key, const std::string& value);
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  /// `key = value` lines in insertion order.
  std::string body() const;
  std::string hash() const;
  /// The first line of every artifact written under this manifest.
  std::string tag() const { return "manifest_hash=" + hash(); }

  void write(const std::filesystem::path& path, const std::string& timestamp) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::vector<std::pair<std::string, std::string>> notes_;
};

/// FNV-1a fingerprint of a file's bytes, as hex.
std::string file_fingerprint(const std::filesystem::path& path);

}  // namespace grover
