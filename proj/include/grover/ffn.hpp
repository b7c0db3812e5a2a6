#pragma once

#include <string>

#include "grover/common.hpp"
#include "grover/params.hpp"

namespace grover {

struct FfnCache {
  Matrix input;
  Matrix pre;     // first affine output
  Matrix hidden;  // max(pre, 0)
};

/// Two-layer expert: W2 * max(W1 x + b1, 0) + b2, width d -> h -> d.
class Ffn {
 public:
  Ffn() = default;
  Ffn(ParamSet& params, const std::string& prefix, Eigen::Index dim, Eigen::Index hidden, Rng& rng);
  Ffn(const ParamSet& params, const std::string& prefix);

  Eigen::Index dim() const { return dim_; }
  Eigen::Index hidden() const { return hidden_; }
  ParamSet::Id w1() const { return w1_; }
  ParamSet::Id b1() const { return b1_; }
  ParamSet::Id w2() const { return w2_; }
  ParamSet::Id b2() const { return b2_; }

  /// Row-wise application to an N x d batch.
  Matrix forward(const ParamSet& params, const Matrix& x, FfnCache* cache = nullptr) const;
  Matrix backward(const ParamSet& params, const FfnCache& cache, const Matrix& grad_out, Gradients& grads) const;

 private:
  Eigen::Index dim_ = 0, hidden_ = 0;
  ParamSet::Id w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0;
};

inline Vector ffn_forward(const ParamSet& params, const Ffn& ffn, const Vector& x) {
  return ffn.forward(params, x.transpose()).row(0).transpose();
}

}  // namespace grover
