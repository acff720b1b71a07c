#ifndef DEEPSEQ_OPTIM_HPP
#define DEEPSEQ_OPTIM_HPP

#include "deepseq/autograd.hpp"
#include "deepseq/data.hpp"
#include "deepseq/models.hpp"
#include "deepseq/params.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepseq {

struct TrainConfig {
  double learning_rate = 0.001;
  double dropout_rate = 0.2;
  double l2_coefficient = 0.0005;
  Index batch_size = 2048;
  int max_epochs = 100;
  int patience = 5;
  std::optional<double> clip_norm = 5.0;
  std::uint64_t seed = 0;
  /// Share of the latest training target months held out for early stopping.
  double valid_fraction = 0.1;
  /// Refits continue from the previous refit's parameters instead of a fresh init.
  bool warm_start = true;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  GradientSet m;
  GradientSet v;

  /// Zero accumulators shaped like `params`.
  static AdamState for_params(const ParamSet& params);
};

/// Mean squared error sum((p - t)^2) / n. Rejects empty or mismatched input.
double mse_loss(const Vector& predictions, const Vector& targets);
/// Sum of squared errors.
double sse_loss(const Vector& predictions, const Vector& targets);
/// Tape form of mse_loss over n x 1 columns.
Var mse_loss(Var predictions, Var targets);

/// coefficient * sum of squares over every weight and bias entry.
double l2_penalty(const ParamSet& params, double coefficient);
/// Tape form over every parameter bound in `p`; `names` fixes the summation order.
Var l2_penalty(const BoundParams& p, const ParamSet& names, double coefficient);

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_by_global_norm(GradientSet& grads, double max_norm);

/// One bias-corrected Adam update. Throws NumericError, leaving params and
/// state untouched, if any gradient entry is not finite; ShapeError if the
/// gradient keys or shapes differ from the parameters.
void adam_step(ParamSet& params, const GradientSet& grads, AdamState& state, double learning_rate);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;  // NaN without a validation slice
  double wall_seconds = 0.0;
  double grad_norm = 0.0;   // mean pre-clip global norm over the epoch's batches
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;

  static constexpr const char* kHeader = "epoch,train_loss,valid_loss,wall_seconds,grad_norm";
  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
};

enum class FitStatus { early_stopped, max_epochs, diverged };
std::string_view to_string(FitStatus s);

struct FitResult {
  ParamSet params;
  TrainingLog log;
  FitStatus status = FitStatus::max_epochs;
  int best_epoch = 0;  // 0 when no epoch completed
};

/// Mini-batch Adam on shuffled windows with dropout on the representation and
/// the L2 penalty. Early stopping watches `valid` (or the training loss when
/// `valid` is empty). Returns the best parameters seen; on a non-finite loss
/// or gradient it stops and returns the last good ones.
FitResult fit(const ModelSpec& spec, const WindowSet& train, const WindowSet& valid, const TrainConfig& config,
              std::optional<ParamSet> init = std::nullopt);

struct TrainValidSplit {
  WindowSet train;
  WindowSet valid;
};

/// Holds out the windows whose target months are the latest `fraction` of
/// the distinct target months (rounded down; none when fewer than two months).
TrainValidSplit carve_validation(const WindowSet& windows, double fraction);

class LeakageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Asserts every window's target month precedes `boundary`.
void check_training_slice(const WindowSet& windows, Month boundary);

/// Windows whose target month lies strictly before `boundary`.
WindowSet training_slice(const WindowSet& windows, Month boundary);

struct RefitResult {
  int refit_year = 0;
  std::vector<int> test_years;
  ParamSet params;
  TrainingLog log;
  FitStatus status = FitStatus::max_epochs;
  int best_epoch = 0;
  std::uint64_t seed = 0;
};

/// Per-refit training seed derived from (seed, model, year).
std::uint64_t refit_seed(std::uint64_t seed, ModelKind kind, int refit_year);

/// One refit: trains on windows targeting months before January of
/// `refit_year`, starting from `warm` or, without it, from a fresh init.
/// rolling_fit is a chain of these, so any single year can be replayed.
RefitResult refit_once(const ModelSpec& spec, const WindowSet& windows, int refit_year, const TrainConfig& config,
                       std::optional<ParamSet> warm = std::nullopt);

using RefitCallback = std::function<void(const RefitResult&)>;

/// Trains one parameter set per refit year of `schedule` on windows whose
/// targets fall before January of that year. Throws DataError if the
/// schedule reaches outside the windows' target months.
std::vector<RefitResult> rolling_fit(const ModelSpec& spec, const WindowSet& windows, const Schedule& schedule,
                                     const TrainConfig& config, const RefitCallback& on_refit = {});

}  // namespace deepseq

#endif  // DEEPSEQ_OPTIM_HPP
