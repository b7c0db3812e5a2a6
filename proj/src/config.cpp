#include "grover/config.hpp"

#include <fstream>

#include "grover/common.hpp"

namespace grover {

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "' expects a boolean, got '" + v + "'");
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(epochs >= 0, "epochs must be >= 0");
  require(lr > 0, "lr must be > 0");
  require(lambda >= 0, "lambda must be >= 0");
  require(gamma > 0 && gamma < 1, "gamma must lie in (0, 1)");
  require(tau > 0, "tau must be > 0");
  require(k_spatial >= 1 && k_feature >= 1, "k_spatial and k_feature must be >= 1");
  require(encoder_layers >= 1, "encoder_layers must be >= 1");
  require(d_hidden >= 1 && d_latent >= 1 && d_att >= 1, "widths must be >= 1");
  require(grid_size >= 4 && grid_size <= 28, "grid_size must lie in [4, 28]");
}

std::vector<std::string> TrainConfig::keys() {
  std::vector<std::string> k;
  for (const auto& [key, value] : TrainConfig{}.to_pairs()) k.push_back(key);
  return k;
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_pairs() const {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"epochs", std::to_string(epochs)},
      {"lr", format_double(lr)},
      {"lambda", format_double(lambda)},
      {"gamma", format_double(gamma)},
      {"tau", format_double(tau)},
      {"delta", format_double(delta)},
      {"k_spatial", std::to_string(k_spatial)},
      {"k_feature", std::to_string(k_feature)},
      {"encoder_layers", std::to_string(encoder_layers)},
      {"d_hidden", std::to_string(d_hidden)},
      {"d_latent", std::to_string(d_latent)},
      {"d_att", std::to_string(d_att)},
      {"grid_size", std::to_string(grid_size)},
      {"seed", std::to_string(seed)},
      {"share_spatial_encoder", b(share_spatial_encoder)},
      {"share_attention", b(share_attention)},
      {"no_moe", b(no_moe)},
      {"no_contrast", b(no_contrast)},
      {"no_kan", b(no_kan)},
  };
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  auto as_int = [&] { return static_cast<int>(parse_int(value)); };
  try {
    if (key == "epochs") epochs = as_int();
    else if (key == "lr") lr = parse_double(value);
    else if (key == "lambda") lambda = parse_double(value);
    else if (key == "gamma") gamma = parse_double(value);
    else if (key == "tau") tau = parse_double(value);
    else if (key == "delta") delta = parse_double(value);
    else if (key == "k_spatial") k_spatial = as_int();
    else if (key == "k_feature") k_feature = as_int();
    else if (key == "encoder_layers") encoder_layers = as_int();
    else if (key == "d_hidden") d_hidden = as_int();
    else if (key == "d_latent") d_latent = as_int();
    else if (key == "d_att") d_att = as_int();
    else if (key == "grid_size") grid_size = as_int();
    else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(value));
    else if (key == "share_spatial_encoder") share_spatial_encoder = parse_bool(key, value);
    else if (key == "share_attention") share_attention = parse_bool(key, value);
    else if (key == "no_moe") no_moe = parse_bool(key, value);
    else if (key == "no_contrast") no_contrast = parse_bool(key, value);
    else if (key == "no_kan") no_kan = parse_bool(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  } catch (const ValidationError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

void TrainConfig::apply(const std::map<std::string, std::string>& values) {
  for (const auto& [k, v] : values) set(k, v);
}

std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  TrainConfig c;
  c.apply(read_key_value_file(path));
  c.validate();
  return c;
}

}  // namespace grover
