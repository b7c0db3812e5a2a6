#pragma once

#include <functional>
#include <string>
#include <vector>

#include "grover/params.hpp"

namespace grover {

/// Loss evaluated at `params`; when `grads` is non-null it receives the
/// analytic gradient (same layout as params.zeros_like()).
using LossFunction = std::function<double(const ParamSet& params, Gradients* grads)>;

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  std::size_t samples_per_tensor = 32;
  /// Relative errors use max(|analytic|, |numeric|, floor) as denominator so
  /// that vanishing components are compared at round-off scale. The floor is
  /// raised to roundoff_factor * machine epsilon * |loss| / eps, the noise level
  /// of the difference quotient itself.
  double floor = 1e-6;
  double roundoff_factor = 1e4;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;  // over the whole tensor
};

struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;
  double tol = 0.0;

  double max_rel_error() const;
  bool passed() const { return max_rel_error() < tol; }
  const GradCheckEntry& entry(const std::string& name) const;
};

/// Compare analytic gradients with central differences on a random subsample
/// of each trainable tensor (all coordinates when the tensor is small).
GradCheckReport grad_check(const LossFunction& loss, const ParamSet& params, const GradCheckOptions& options = {});

}  // namespace grover
