#include "grover/kan.hpp"

#include <limits>

namespace grover {

SplineGrid::SplineGrid(int basis_count) : size(basis_count) {
  if (basis_count < degree + 1 || basis_count > 28)
    throw ConfigError("spline grid size must be in [4, 28], got " + std::to_string(basis_count));
  const int intervals = basis_count - degree;
  for (int i = 0; i < degree + 1; ++i) knots.push_back(0.0);
  for (int i = 1; i < intervals; ++i) knots.push_back(static_cast<double>(i) / intervals);
  for (int i = 0; i < degree + 1; ++i) knots.push_back(1.0);
}

KanLayer::KanLayer(ParamSet& params, const std::string& prefix, Eigen::Index in, Eigen::Index out,
                   const SplineGrid& grid, Rng& rng)
    : in_(in), out_(out), grid_(grid) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  linear_ = params.add(prefix + ".linear", random_uniform(out, in, bound, rng));
  spline_ = params.add(prefix + ".spline", Matrix::Zero(out, in * grid.size));
  lo_ = params.add(prefix + ".lo", Matrix::Zero(1, in), false);
  range_ = params.add(prefix + ".range", Matrix::Ones(1, in), false);
}

KanLayer::KanLayer(const ParamSet& params, const std::string& prefix, const SplineGrid& grid) : grid_(grid) {
  linear_ = params.id(prefix + ".linear");
  spline_ = params.id(prefix + ".spline");
  lo_ = params.id(prefix + ".lo");
  range_ = params.id(prefix + ".range");
  out_ = params[linear_].rows();
  in_ = params[linear_].cols();
  if (params[spline_].rows() != out_ || params[spline_].cols() != in_ * grid.size)
    throw CheckpointError("tensor '" + prefix + ".spline' does not match grid size " + std::to_string(grid.size));
}

void KanLayer::calibrate(ParamSet& params, const std::vector<const Matrix*>& inputs) const {
  if (inputs.empty()) throw ArgumentError("kan calibrate: no inputs");
  for (const Matrix* x : inputs)
    if (x->cols() != in_ || x->rows() == 0)
      throw ArgumentError("kan calibrate: expected nonempty input with " + std::to_string(in_) + " columns");
  for (Eigen::Index p = 0; p < in_; ++p) {
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (const Matrix* x : inputs) {
      mn = std::min(mn, x->col(p).minCoeff());
      mx = std::max(mx, x->col(p).maxCoeff());
    }
    const double span = mx - mn;
    if (span > 0) {
      params[lo_](0, p) = mn - kNormalizationMargin * span;
      params[range_](0, p) = (1.0 + 2.0 * kNormalizationMargin) * span;
    } else {
      params[lo_](0, p) = mn - 0.5;
      params[range_](0, p) = 1.0;
    }
  }
}

Matrix KanLayer::forward(const ParamSet& params, const Matrix& x, KanCache* cache, bool use_spline) const {
  if (x.cols() != in_)
    throw ArgumentError("kan_transform: expected " + std::to_string(in_) + " input columns, got " +
                        std::to_string(x.cols()));
  const Eigen::Index n = x.rows();
  const int g = grid_.size;
  Matrix xhat = (x.rowwise() - params[lo_].row(0)).array().rowwise() / params[range_].row(0).array();
  Matrix out = xhat * params[linear_].transpose();
  if (use_spline) {
    Matrix basis(n, in_ * g);
    Matrix deriv;
    if (cache) deriv.resize(n, in_ * g);
    double vals[32], ders[32];
    for (Eigen::Index p = 0; p < in_; ++p) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = xhat(i, p);
        spline_basis(v, grid_, vals, cache ? ders : nullptr);
        const bool inside = v >= 0.0 && v <= 1.0;
        for (int k = 0; k < g; ++k) {
          basis(i, p * g + k) = vals[k];
          if (cache) deriv(i, p * g + k) = inside ? ders[k] : 0.0;
        }
      }
    }
    out.noalias() += basis * params[spline_].transpose();
    if (cache) {
      cache->basis = std::move(basis);
      cache->basis_deriv = std::move(deriv);
    }
  }
  if (cache) cache->normalized = std::move(xhat);
  return out;
}

Matrix KanLayer::backward(const ParamSet& params, const KanCache& cache, const Matrix& grad_out, Gradients& grads,
                          bool need_input_grad, bool use_spline) const {
  grads[linear_].noalias() += grad_out.transpose() * cache.normalized;
  if (use_spline) grads[spline_].noalias() += grad_out.transpose() * cache.basis;
  if (!need_input_grad) return {};
  Matrix dxhat = grad_out * params[linear_];
  if (use_spline) {
    const Matrix through = (grad_out * params[spline_]).cwiseProduct(cache.basis_deriv);
    const int g = grid_.size;
    for (Eigen::Index p = 0; p < in_; ++p) dxhat.col(p) += through.middleCols(p * g, g).rowwise().sum();
  }
  return dxhat.array().rowwise() / params[range_].row(0).array();
}

}  // namespace grover
