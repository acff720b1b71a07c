#include "deepseq/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace deepseq {

namespace {

double eval_loss(const LossClosure& loss, const ParamSet& params) {
  Tape tape;
  BoundParams p(tape, params);
  const double v = loss(p).value()(0, 0);
  if (!std::isfinite(v)) {
    throw NumericError("grad_check: non-finite loss during perturbation");
  }
  return v;
}

struct Entry {
  std::string name;
  Index index;
};

}  // namespace

GradCheckResult grad_check(const LossClosure& loss, const ParamSet& params, const GradCheckOptions& opts) {
  if (!(opts.epsilon > 0.0) || opts.epsilon > 1e-3) {
    throw std::invalid_argument("grad_check: epsilon must lie in (0, 1e-3]");
  }

  GradientSet analytic;
  {
    Tape tape;
    BoundParams p(tape, params);
    analytic = tape.backward(loss(p));
  }

  std::vector<Entry> entries;
  for (const auto& [name, m] : params) {
    for (Index i = 0; i < m.size(); ++i) entries.push_back({name, i});
  }
  if (entries.size() > opts.samples) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(opts.samples);
  }

  GradCheckResult result;
  ParamSet work = params;
  for (const Entry& e : entries) {
    double& slot = work.at(e.name).data()[e.index];
    const double original = slot;
    slot = original + opts.epsilon;
    const double up = eval_loss(loss, work);
    slot = original - opts.epsilon;
    const double down = eval_loss(loss, work);
    slot = original;

    const double numeric = (up - down) / (2.0 * opts.epsilon);
    const double a = analytic.at(e.name).data()[e.index];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double rel = std::abs(a - numeric) / denom;
    ++result.entries_checked;
    if (rel >= result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_param = e.name;
      result.worst_index = e.index;
      result.worst_analytic = a;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

GradCheckResult grad_check(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch,
                           const ForwardMode& mode, const GradCheckOptions& opts) {
  if (mode.stochastic()) {
    throw std::invalid_argument("grad_check: dropout makes the forward pass stochastic");
  }
  check_params(spec, params);
  batch.validate();
  if (batch.targets.size() != batch.size()) {
    throw ShapeError("grad_check: batch needs one target per sample");
  }
  LossClosure closure = [&](const BoundParams& p) {
    Tape& tape = p.tape();
    Var pred = predict(spec, p, tape.constant(batch.inputs), mode);
    Var target = tape.constant(Matrix(batch.targets));
    return ad::mean(ad::square(ad::sub(pred, target)));
  };
  return grad_check(closure, params, opts);
}

}  // namespace deepseq
