#include "grover/params.hpp"

#include <fstream>
#include <sstream>

namespace grover {

ParamSet::Id ParamSet::add(const std::string& name, Matrix value, bool trainable) {
  if (index_.count(name)) throw ConfigError("parameter '" + name + "' registered twice");
  const Id id = tensors_.size();
  tensors_.push_back({name, std::move(value), trainable});
  index_.emplace(name, id);
  return id;
}

ParamSet::Id ParamSet::id(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamSet::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& t : tensors_)
    if (!trainable_only || t.trainable) n += static_cast<std::size_t>(t.value.size());
  return n;
}

std::vector<Matrix> ParamSet::zeros_like() const {
  std::vector<Matrix> out;
  out.reserve(tensors_.size());
  for (const auto& t : tensors_) out.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
  return out;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.tensors_.size() != b.tensors_.size()) return false;
  for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
    const auto& x = a.tensors_[i];
    const auto& y = b.tensors_[i];
    if (x.name != y.name || x.trainable != y.trainable || x.value.rows() != y.value.rows() ||
        x.value.cols() != y.value.cols() || x.value != y.value)
      return false;
  }
  return true;
}

AdamState make_adam_state(const ParamSet& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParamSet& params, const Gradients& grads, AdamState& state, const AdamOptions& options) {
  if (!(options.lr > 0)) throw ArgumentError("adam_step: learning rate must be positive");
  if (grads.size() != params.size() || state.first.size() != params.size())
    throw ArgumentError("adam_step: gradient/state count does not match parameters");
  for (ParamSet::Id id = 0; id < params.size(); ++id) {
    if (grads[id].rows() != params[id].rows() || grads[id].cols() != params[id].cols())
      throw ArgumentError("adam_step: gradient shape mismatch for '" + params.name(id) + "'");
    if (params.trainable(id) && !grads[id].allFinite())
      throw TrainingError("non-finite gradient in parameter '" + params.name(id) + "'");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
  for (ParamSet::Id id = 0; id < params.size(); ++id) {
    if (!params.trainable(id)) continue;
    Matrix& m = state.first[id];
    Matrix& v = state.second[id];
    m = options.beta1 * m + (1.0 - options.beta1) * grads[id];
    v = options.beta2 * v + (1.0 - options.beta2) * grads[id].cwiseAbs2();
    params[id].array() -= options.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + options.eps);
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params,
                     const std::map<std::string, std::string>& meta) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << kCheckpointTag << ' ' << kCheckpointVersion << "\n";
  for (const auto& [k, v] : meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos)
      throw CheckpointError("checkpoint metadata must be single-line, key without spaces: '" + k + "'");
    out << "meta " << k << ' ' << v << "\n";
  }
  for (ParamSet::Id id = 0; id < params.size(); ++id) {
    const Matrix& t = params[id];
    out << "tensor " << params.name(id) << ' ' << t.rows() << ' ' << t.cols() << ' ' << (params.trainable(id) ? 1 : 0)
        << "\n";
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) out << (j ? " " : "") << format_double(t(i, j));
      out << "\n";
    }
  }
  out << "end\n";
}

ParamSet load_checkpoint(const std::filesystem::path& path, std::map<std::string, std::string>* meta) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw CheckpointError(path.string() + ": empty checkpoint");
  {
    std::istringstream hs(line);
    std::string tag;
    int version = 0;
    hs >> tag >> version;
    if (tag != kCheckpointTag) throw CheckpointError(path.string() + ": not a checkpoint file");
    if (version != kCheckpointVersion)
      throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  ParamSet params;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value[0] == ' ') value.erase(0, 1);
      if (meta) (*meta)[key] = value;
    } else if (kind == "tensor") {
      std::string name;
      Eigen::Index rows = 0, cols = 0;
      int trainable = 1;
      if (!(ls >> name >> rows >> cols >> trainable) || rows < 0 || cols < 0)
        throw CheckpointError(path.string() + ": malformed tensor header '" + line + "'");
      Matrix t(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw CheckpointError(path.string() + ": truncated tensor '" + name + "'");
        std::istringstream rs(line);
        for (Eigen::Index j = 0; j < cols; ++j) {
          std::string tok;
          if (!(rs >> tok)) throw CheckpointError(path.string() + ": short row in tensor '" + name + "'");
          t(i, j) = parse_double(tok);
        }
      }
      params.add(name, std::move(t), trainable != 0);
    } else {
      throw CheckpointError(path.string() + ": unexpected line '" + line + "'");
    }
  }
  if (!ended) throw CheckpointError(path.string() + ": missing end marker");
  return params;
}

}  // namespace grover
