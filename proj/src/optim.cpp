#include "deepseq/optim.hpp"

#include "deepseq/text.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

namespace deepseq {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be > 0");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout_rate must lie in [0, 1)");
  }
  if (!(l2_coefficient >= 0.0) || !std::isfinite(l2_coefficient)) {
    throw std::invalid_argument("l2_coefficient must be >= 0");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be positive");
  if (patience < 1) throw std::invalid_argument("patience must be positive");
  if (clip_norm && !(*clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0 or disabled");
  if (!(valid_fraction >= 0.0 && valid_fraction < 1.0)) {
    throw std::invalid_argument("valid_fraction must lie in [0, 1)");
  }
}

AdamState AdamState::for_params(const ParamSet& params) {
  AdamState s;
  for (const auto& [name, m] : params) {
    s.m.set(name, Matrix::Zero(m.rows(), m.cols()));
    s.v.set(name, Matrix::Zero(m.rows(), m.cols()));
  }
  return s;
}

namespace {

void check_pair(const Vector& p, const Vector& t, const char* what) {
  if (p.size() == 0) throw ShapeError(std::string(what) + ": empty batch");
  if (p.size() != t.size()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(p.size()) + " predictions vs " +
                     std::to_string(t.size()) + " targets");
  }
}

}  // namespace

double sse_loss(const Vector& predictions, const Vector& targets) {
  check_pair(predictions, targets, "sse_loss");
  return (predictions - targets).squaredNorm();
}

double mse_loss(const Vector& predictions, const Vector& targets) {
  check_pair(predictions, targets, "mse_loss");
  return (predictions - targets).squaredNorm() / static_cast<double>(predictions.size());
}

Var mse_loss(Var predictions, Var targets) {
  if (predictions.rows() == 0) throw ShapeError("mse_loss: empty batch");
  return ad::mean(ad::square(ad::sub(predictions, targets)));
}

double l2_penalty(const ParamSet& params, double coefficient) {
  if (coefficient < 0.0) throw std::invalid_argument("l2_penalty: coefficient must be >= 0");
  return coefficient * squared_norm(params);
}

Var l2_penalty(const BoundParams& p, const ParamSet& names, double coefficient) {
  if (coefficient < 0.0) throw std::invalid_argument("l2_penalty: coefficient must be >= 0");
  std::vector<Var> parts;
  parts.reserve(names.size());
  for (const auto& [name, m] : names) parts.push_back(ad::sum(ad::square(p.at(name))));
  if (parts.empty()) return p.tape().constant(Matrix::Zero(1, 1));
  Var total = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) total = ad::add(total, parts[i]);
  return ad::scale(total, coefficient);
}

double clip_by_global_norm(GradientSet& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_by_global_norm: max_norm must be > 0");
  const double norm = std::sqrt(squared_norm(grads));
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& [name, g] : grads) g *= f;
  }
  return norm;
}

void adam_step(ParamSet& params, const GradientSet& grads, AdamState& state, double learning_rate) {
  if (grads.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (const auto& [name, p] : params) {
    const Matrix& g = grads.at(name);
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      throw ShapeError("adam_step: gradient of '" + name + "' is " + shape_string(g) + ", parameter is " +
                       shape_string(p));
    }
    if (!all_finite(g)) {
      throw NumericError("adam_step: non-finite gradient for '" + name + "'; step refused");
    }
  }
  if (state.m.empty() && state.v.empty()) {
    const AdamState fresh = AdamState::for_params(params);
    state.m = fresh.m;
    state.v = fresh.v;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    const Matrix& g = grads.at(name);
    Matrix& m = state.m.at(name);
    Matrix& v = state.v.at(name);
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    p.array() -= learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.epsilon);
  }
}

void TrainingLog::write_csv(std::ostream& out) const {
  out << kHeader << '\n';
  for (const auto& e : epochs) {
    out << e.epoch << ',' << text::format_double(e.train_loss) << ',' << text::format_double(e.valid_loss) << ','
        << text::format_double(e.wall_seconds) << ',' << text::format_double(e.grad_norm) << '\n';
  }
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write training log " + path.string());
  write_csv(out);
}

std::string_view to_string(FitStatus s) {
  switch (s) {
    case FitStatus::early_stopped:
      return "early_stopped";
    case FitStatus::max_epochs:
      return "max_epochs";
    case FitStatus::diverged:
      return "diverged";
  }
  return "?";
}

FitResult fit(const ModelSpec& spec, const WindowSet& train, const WindowSet& valid, const TrainConfig& config,
              std::optional<ParamSet> init) {
  config.validate();
  spec.validate();
  if (train.empty()) throw DataError("fit: empty training set");

  std::mt19937_64 rng(config.seed);
  ParamSet params = init ? std::move(*init) : init_params(spec, text::mix_seed(config.seed, 0x1417));
  check_params(spec, params);
  AdamState adam = AdamState::for_params(params);

  FitResult result;
  result.params = params;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<Index> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), Index{0});
  const auto t0 = std::chrono::steady_clock::now();
  ForwardMode mode{true, config.dropout_rate, &rng};

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    double norm_sum = 0.0;
    int batches = 0;
    bool diverged = false;
    std::vector<Index> rows;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
      const SequenceBatch batch = train.batch(rows);

      Tape tape;
      BoundParams bound(tape, params);
      Var pred = predict(spec, bound, tape.constant(batch.inputs), mode);
      Var data_loss = mse_loss(pred, tape.constant(Matrix(batch.targets)));
      Var loss = config.l2_coefficient > 0.0 ? ad::add(data_loss, l2_penalty(bound, params, config.l2_coefficient))
                                             : data_loss;
      const double lv = data_loss.value()(0, 0);
      if (!std::isfinite(loss.value()(0, 0))) {
        diverged = true;
        break;
      }
      GradientSet grads;
      try {
        grads = tape.backward(loss);
      } catch (const NumericError&) {
        diverged = true;
        break;
      }
      const double norm =
          config.clip_norm ? clip_by_global_norm(grads, *config.clip_norm) : std::sqrt(squared_norm(grads));
      adam_step(params, grads, adam, config.learning_rate);
      loss_sum += lv * static_cast<double>(rows.size());
      norm_sum += norm;
      ++batches;
    }
    if (diverged || !std::isfinite(loss_sum)) {
      result.status = FitStatus::diverged;
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.grad_norm = batches > 0 ? norm_sum / batches : 0.0;
    rec.valid_loss = valid.empty() ? std::numeric_limits<double>::quiet_NaN()
                                   : mse_loss(predict_values(spec, params, valid.inputs), valid.targets);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(rec);

    const double watched = valid.empty() ? rec.train_loss : rec.valid_loss;
    if (!std::isfinite(watched)) {
      result.status = FitStatus::diverged;
      break;
    }
    if (watched < best) {
      best = watched;
      since_best = 0;
      result.params = params;
      result.best_epoch = epoch;
    } else if (++since_best >= config.patience) {
      result.status = FitStatus::early_stopped;
      break;
    }
  }
  return result;
}

TrainValidSplit carve_validation(const WindowSet& windows, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("carve_validation: fraction must lie in [0, 1)");
  }
  std::set<int> months;
  for (Index i = 0; i < windows.size(); ++i) months.insert(windows.target_month(i).index());
  const auto n_valid = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(months.size())));
  if (months.size() < 2 || n_valid == 0) {
    return {windows, empty_window_set()};
  }
  const int cutoff = *std::next(months.begin(), static_cast<std::ptrdiff_t>(months.size() - n_valid));
  std::vector<Index> tr;
  std::vector<Index> va;
  for (Index i = 0; i < windows.size(); ++i) {
    (windows.target_month(i).index() < cutoff ? tr : va).push_back(i);
  }
  return {windows.subset(tr), windows.subset(va)};
}

void check_training_slice(const WindowSet& windows, Month boundary) {
  for (Index i = 0; i < windows.size(); ++i) {
    if (!(windows.target_month(i) < boundary)) {
      throw LeakageError("training window for " + windows.asset_ids[static_cast<std::size_t>(i)] + " targets " +
                         windows.target_month(i).str() + ", not before " + boundary.str());
    }
  }
}

WindowSet training_slice(const WindowSet& windows, Month boundary) {
  std::vector<Index> rows;
  for (Index i = 0; i < windows.size(); ++i) {
    if (windows.target_month(i) < boundary) rows.push_back(i);
  }
  return windows.subset(rows);
}

std::uint64_t refit_seed(std::uint64_t seed, ModelKind kind, int refit_year) {
  return text::mix_seed(text::mix_seed(seed, static_cast<std::uint64_t>(kind)), static_cast<std::uint64_t>(refit_year));
}

RefitResult refit_once(const ModelSpec& spec, const WindowSet& windows, int refit_year, const TrainConfig& config,
                       std::optional<ParamSet> warm) {
  const Month boundary{refit_year, 1};
  const WindowSet slice = training_slice(windows, boundary);
  check_training_slice(slice, boundary);
  if (slice.empty()) throw DataError("refit " + std::to_string(refit_year) + ": no training windows before " + boundary.str());

  TrainConfig cfg = config;
  cfg.seed = refit_seed(config.seed, spec.kind, refit_year);
  ParamSet init = warm ? std::move(*warm) : init_params(spec, text::mix_seed(cfg.seed, 0x1417));
  TrainValidSplit split = carve_validation(slice, config.valid_fraction);
  FitResult fr = fit(spec, split.train, split.valid, cfg, std::move(init));

  RefitResult r;
  r.refit_year = refit_year;
  r.test_years = {refit_year};
  r.params = std::move(fr.params);
  r.log = std::move(fr.log);
  r.status = fr.status;
  r.best_epoch = fr.best_epoch;
  r.seed = cfg.seed;
  return r;
}

std::vector<RefitResult> rolling_fit(const ModelSpec& spec, const WindowSet& windows, const Schedule& schedule,
                                     const TrainConfig& config, const RefitCallback& on_refit) {
  config.validate();
  spec.validate();
  if (schedule.entries.empty()) throw DataError("rolling_fit: empty schedule");
  if (windows.empty()) throw DataError("rolling_fit: no windows");
  Month lo = windows.target_month(0);
  Month hi = lo;
  for (Index i = 1; i < windows.size(); ++i) {
    lo = std::min(lo, windows.target_month(i));
    hi = std::max(hi, windows.target_month(i));
  }
  for (const auto& e : schedule.entries) {
    if (e.test_year > hi.year || e.refit_year <= lo.year) {
      throw DataError("rolling_fit: schedule year " + std::to_string(e.test_year) + " outside target months " +
                      lo.str() + ".." + hi.str());
    }
  }

  std::vector<RefitResult> out;
  std::optional<ParamSet> previous;
  for (int year : schedule.refit_years()) {
    RefitResult r = refit_once(spec, windows, year, config, config.warm_start ? previous : std::nullopt);
    r.test_years = schedule.test_years_for(year);
    previous = r.params;
    if (on_refit) on_refit(r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace deepseq
