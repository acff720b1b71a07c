#ifndef DEEPSEQ_GRADCHECK_HPP
#define DEEPSEQ_GRADCHECK_HPP

#include "deepseq/autograd.hpp"
#include "deepseq/models.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace deepseq {

struct GradCheckOptions {
  double epsilon = 1e-6;
  /// Number of parameter entries compared; all entries when the model has fewer.
  std::size_t samples = 50;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
  std::string worst_param;
  Index worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Builds a scalar loss on a fresh tape from bound parameters.
using LossClosure = std::function<Var(const BoundParams&)>;

/// Compares tape gradients with central differences
/// (f(theta + eps) - f(theta - eps)) / 2 eps on a seeded sample of entries.
/// Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const LossClosure& loss, const ParamSet& params, const GradCheckOptions& opts = {});

/// Mean-squared forecast error of `spec` on `batch`. Rejects stochastic
/// forward modes since finite differences need a deterministic loss.
GradCheckResult grad_check(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch,
                           const ForwardMode& mode, const GradCheckOptions& opts = {});

}  // namespace deepseq

#endif  // DEEPSEQ_GRADCHECK_HPP
