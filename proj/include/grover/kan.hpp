#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "grover/common.hpp"
#include "grover/params.hpp"

namespace grover {

/// Clamped (open-uniform) cubic B-spline knot vector on [0, 1] with `size`
/// basis functions.
struct SplineGrid {
  static constexpr int degree = 3;
  int size = 8;
  std::vector<double> knots;

  explicit SplineGrid(int basis_count = 8);
};

/// Cubic B-spline basis at clamp(x, 0, 1), optionally with d/dx of each basis
/// function at the clamped point. Values are nonnegative and sum to one.
template <typename Scalar>
void spline_basis(Scalar x, const SplineGrid& grid, Scalar* values, Scalar* derivs = nullptr) {
  const auto& t = grid.knots;
  const int nk = static_cast<int>(t.size());
  x = std::clamp(x, Scalar(0), Scalar(1));

  // Order-1 (piecewise constant) basis; the right end belongs to the last
  // non-degenerate span.
  Scalar b[32];
  const int spans = nk - 1;
  int span = grid.size - 1;
  for (int i = grid.degree; i < grid.size; ++i) {
    if (x >= Scalar(t[i]) && x < Scalar(t[i + 1])) {
      span = i;
      break;
    }
  }
  for (int i = 0; i < spans; ++i) b[i] = Scalar(0);
  b[span] = Scalar(1);

  auto ratio = [](Scalar num, double den) { return den > 0 ? num / Scalar(den) : Scalar(0); };
  Scalar lower[32];
  for (int order = 2; order <= grid.degree + 1; ++order) {
    const int count = nk - order;
    if (order == grid.degree + 1)
      for (int i = 0; i < count + 1; ++i) lower[i] = b[i];
    for (int i = 0; i < count; ++i) {
      b[i] = ratio(x - Scalar(t[i]), t[i + order - 1] - t[i]) * b[i] +
             ratio(Scalar(t[i + order]) - x, t[i + order] - t[i + 1]) * b[i + 1];
    }
  }
  for (int g = 0; g < grid.size; ++g) values[g] = b[g];
  if (derivs) {
    const Scalar p = Scalar(grid.degree);
    for (int g = 0; g < grid.size; ++g)
      derivs[g] = ratio(p * lower[g], t[g + grid.degree] - t[g]) -
                  ratio(p * lower[g + 1], t[g + grid.degree + 1] - t[g + 1]);
  }
}

template <typename Scalar>
VectorX<Scalar> spline_basis(Scalar x, const SplineGrid& grid) {
  VectorX<Scalar> v(grid.size);
  spline_basis(x, grid, v.data());
  return v;
}

/// Relative padding added on both sides of the observed column range when
/// input normalization statistics are frozen.
inline constexpr double kNormalizationMargin = 0.05;

struct KanCache {
  Matrix normalized;  // N x in
  Matrix basis;       // N x (in * G); empty when splines are disabled
  Matrix basis_deriv; // N x (in * G), zero where the input was clamped
};

/// One KAN layer: out(i,q) = sum_p a(q,p) xhat(i,p) + sum_{p,g} c(q, p*G+g) B_g(xhat(i,p)),
/// with xhat = (x - lo) / range per column.
///
/// Tensors: `<prefix>.linear` (out x in), `<prefix>.spline` (out x in*G),
/// and the frozen, non-trainable `<prefix>.lo`, `<prefix>.range` (1 x in).
class KanLayer {
 public:
  KanLayer() = default;
  KanLayer(ParamSet& params, const std::string& prefix, Eigen::Index in, Eigen::Index out, const SplineGrid& grid,
           Rng& rng);
  /// Attach to tensors already present in `params` (checkpoint restore).
  KanLayer(const ParamSet& params, const std::string& prefix, const SplineGrid& grid);

  Eigen::Index in_dim() const { return in_; }
  Eigen::Index out_dim() const { return out_; }
  ParamSet::Id linear() const { return linear_; }
  ParamSet::Id spline() const { return spline_; }
  ParamSet::Id lo() const { return lo_; }
  ParamSet::Id range() const { return range_; }
  const SplineGrid& grid() const { return grid_; }

  /// Freeze per-column min-max statistics (with margin) over the rows of all inputs.
  void calibrate(ParamSet& params, const std::vector<const Matrix*>& inputs) const;
  void calibrate(ParamSet& params, const Matrix& x) const { calibrate(params, std::vector<const Matrix*>{&x}); }

  Matrix forward(const ParamSet& params, const Matrix& x, KanCache* cache = nullptr, bool use_spline = true) const;

  /// Accumulates parameter gradients; returns d loss / d x when requested.
  Matrix backward(const ParamSet& params, const KanCache& cache, const Matrix& grad_out, Gradients& grads,
                  bool need_input_grad, bool use_spline = true) const;

 private:
  Eigen::Index in_ = 0, out_ = 0;
  SplineGrid grid_;
  ParamSet::Id linear_ = 0, spline_ = 0, lo_ = 0, range_ = 0;
};

/// Free-function form of a KAN layer evaluation.
inline Matrix kan_transform(const ParamSet& params, const KanLayer& layer, const Matrix& x) {
  return layer.forward(params, x);
}

}  // namespace grover
