#include "grover/grad_check.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace grover {

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& t : tensors) m = std::max(m, t.max_rel_error);
  return m;
}

const GradCheckEntry& GradCheckReport::entry(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw ArgumentError("grad_check report has no tensor '" + name + "'");
}

GradCheckReport grad_check(const LossFunction& loss, const ParamSet& params, const GradCheckOptions& options) {
  if (!(options.eps > 0)) throw ArgumentError("grad_check: eps must be positive");
  Gradients analytic = params.zeros_like();
  const double base = loss(params, &analytic);
  if (!std::isfinite(base)) throw TrainingError("grad_check: loss is not finite at the base point");

  GradCheckReport report;
  report.tol = options.tol;
  const double floor = std::max(options.floor, options.roundoff_factor * std::numeric_limits<double>::epsilon() *
                                                   std::abs(base) / options.eps);
  ParamSet probe = params;
  Rng rng(options.seed);
  for (ParamSet::Id id = 0; id < params.size(); ++id) {
    if (!params.trainable(id)) continue;
    GradCheckEntry e;
    e.name = params.name(id);
    const auto total = static_cast<std::size_t>(params[id].size());
    e.max_abs_analytic = total ? analytic[id].cwiseAbs().maxCoeff() : 0.0;

    std::vector<std::size_t> coords(total);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (total > options.samples_per_tensor) {
      for (std::size_t i = 0; i < options.samples_per_tensor; ++i)
        std::swap(coords[i], coords[i + rng.below(total - i)]);
      coords.resize(options.samples_per_tensor);
    }
    for (std::size_t flat : coords) {
      double& slot = probe[id].data()[flat];
      const double saved = slot;
      slot = saved + options.eps;
      const double up = loss(probe, nullptr);
      slot = saved - options.eps;
      const double down = loss(probe, nullptr);
      slot = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw TrainingError("grad_check: loss is not finite near tensor '" + e.name + "'");
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[id].data()[flat];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      e.max_rel_error = std::max(e.max_rel_error, std::abs(a - numeric) / denom);
      ++e.checked;
    }
    report.tensors.push_back(std::move(e));
  }
  return report;
}

}  // namespace grover
