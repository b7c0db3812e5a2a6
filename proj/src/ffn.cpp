#include "grover/ffn.hpp"

namespace grover {

Ffn::Ffn(ParamSet& params, const std::string& prefix, Eigen::Index dim, Eigen::Index hidden, Rng& rng)
    : dim_(dim), hidden_(hidden) {
  const double b1 = 1.0 / std::sqrt(static_cast<double>(dim));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  w1_ = params.add(prefix + ".w1", random_uniform(hidden, dim, b1, rng));
  b1_ = params.add(prefix + ".b1", random_uniform(1, hidden, b1, rng));
  w2_ = params.add(prefix + ".w2", random_uniform(dim, hidden, b2, rng));
  b2_ = params.add(prefix + ".b2", random_uniform(1, dim, b2, rng));
}

Ffn::Ffn(const ParamSet& params, const std::string& prefix) {
  w1_ = params.id(prefix + ".w1");
  b1_ = params.id(prefix + ".b1");
  w2_ = params.id(prefix + ".w2");
  b2_ = params.id(prefix + ".b2");
  hidden_ = params[w1_].rows();
  dim_ = params[w1_].cols();
  if (params[w2_].rows() != dim_ || params[w2_].cols() != hidden_)
    throw CheckpointError("expert '" + prefix + "' has inconsistent shapes");
}

Matrix Ffn::forward(const ParamSet& params, const Matrix& x, FfnCache* cache) const {
  if (x.cols() != dim_)
    throw ArgumentError("ffn: expected width " + std::to_string(dim_) + ", got " + std::to_string(x.cols()));
  Matrix pre = (x * params[w1_].transpose()).rowwise() + params[b1_].row(0);
  Matrix hidden = pre.cwiseMax(0.0);
  Matrix out = (hidden * params[w2_].transpose()).rowwise() + params[b2_].row(0);
  if (cache) {
    cache->input = x;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out;
}

Matrix Ffn::backward(const ParamSet& params, const FfnCache& cache, const Matrix& grad_out, Gradients& grads) const {
  grads[w2_].noalias() += grad_out.transpose() * cache.hidden;
  grads[b2_] += grad_out.colwise().sum();
  Matrix dpre = (grad_out * params[w2_]).cwiseProduct((cache.pre.array() > 0.0).cast<double>().matrix());
  grads[w1_].noalias() += dpre.transpose() * cache.input;
  grads[b1_] += dpre.colwise().sum();
  return dpre * params[w1_];
}

}  // namespace grover
