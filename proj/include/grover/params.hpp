#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "grover/common.hpp"

namespace grover {

/// Registry of named tensors. Each tensor is registered exactly once and keeps
/// its registration index for the life of the set.
class ParamSet {
 public:
  using Id = std::size_t;

  Id add(const std::string& name, Matrix value, bool trainable = true);

  Matrix& operator[](Id id) { return tensors_[id].value; }
  const Matrix& operator[](Id id) const { return tensors_[id].value; }

  Id id(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::string& name(Id id) const { return tensors_[id].name; }
  bool trainable(Id id) const { return tensors_[id].trainable; }
  void set_trainable(Id id, bool on) { tensors_[id].trainable = on; }

  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count(bool trainable_only = false) const;

  /// Zero tensors shaped like every registered tensor.
  std::vector<Matrix> zeros_like() const;

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  struct Tensor {
    std::string name;
    Matrix value;
    bool trainable = true;
  };
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, Id> index_;
};

using Gradients = std::vector<Matrix>;

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  long step = 0;
};

AdamState make_adam_state(const ParamSet& params);

/// One bias-corrected Adam update over trainable tensors. A non-finite gradient
/// raises TrainingError naming the tensor before anything is modified.
void adam_step(ParamSet& params, const Gradients& grads, AdamState& state, const AdamOptions& options);

/// Versioned text checkpoint holding metadata and every tensor with its shape.
inline constexpr const char* kCheckpointTag = "GROVER-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params,
                     const std::map<std::string, std::string>& meta);
ParamSet load_checkpoint(const std::filesystem::path& path, std::map<std::string, std::string>* meta = nullptr);

}  // namespace grover
