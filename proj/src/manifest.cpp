#include "grover/manifest.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "grover/common.hpp"

namespace grover {

namespace {

void check_entry(const std::string& key, const std::string& value,
                 std::initializer_list<const std::vector<std::pair<std::string, std::string>>*> existing) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos)
    throw ArgumentError("manifest key '" + key + "' is not a plain token");
  if (key == "manifest_hash" || key == "timestamp") throw ArgumentError("manifest key '" + key + "' is reserved");
  if (value.find('\n') != std::string::npos) throw ArgumentError("manifest value for '" + key + "' spans lines");
  for (const auto* list : existing)
    for (const auto& [k, v] : *list)
      if (k == key) throw ArgumentError("manifest key '" + key + "' added twice");
}

}  // namespace

void Manifest::add(const std::string& key, const std::string& value) {
  check_entry(key, value, {&entries_, &notes_});
  entries_.emplace_back(key, value);
}

void Manifest::note(const std::string& key, const std::string& value) {
  check_entry(key, value, {&entries_, &notes_});
  notes_.emplace_back(key, value);
}

std::string Manifest::body() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

std::string Manifest::hash() const { return hex64(fnv1a64(body())); }

void Manifest::write(const std::filesystem::path& path, const std::string& timestamp) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "manifest_hash = " << hash() << "\n";
  out << "timestamp = " << timestamp << "\n";
  for (const auto& [k, v] : notes_) out << k << " = " << v << "\n";
  out << body();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string file_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return hex64(fnv1a64(buf.str()));
}

}  // namespace grover
