#ifndef DEEPSEQ_EXPERIMENT_HPP
#define DEEPSEQ_EXPERIMENT_HPP

#include "deepseq/config.hpp"
#include "deepseq/data.hpp"
#include "deepseq/eval.hpp"
#include "deepseq/optim.hpp"
#include "deepseq/portfolio.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace deepseq {

/// Panel from `config.panel`, or the synthetic panel when that is empty.
PanelDataset load_data(const ExperimentConfig& config);

struct PreparedData {
  PanelDataset raw;
  WindowSet windows;  // built from the rank-normalized panel
  Schedule schedule;
};

PreparedData prepare(const ExperimentConfig& config);

/// Writes <output>/panel.csv and <output>/panel.oracle.json. Returns the panel path.
std::filesystem::path cmd_synth(const ExperimentConfig& config, std::ostream& log);

/// Rolling fits for every configured model: checkpoints/<MODEL>_<year>.json,
/// logs/<MODEL>_<year>.csv and manifest.json under the output directory.
void cmd_train(const ExperimentConfig& config, std::ostream& log);

/// Forecasts every test year from the stored checkpoints (or reads them from
/// `forecast_dir`), writes forecasts/<MODEL>.csv and evaluate.csv.
std::vector<MetricsRow> cmd_evaluate(const ExperimentConfig& config, std::ostream& log);

/// One table per weight mode and universe: backtest_<mode>_<all|exmicro>.csv,
/// with monthly series under series/.
void cmd_backtest(const ExperimentConfig& config, std::ostream& log);

/// Collects evaluate.csv and the backtest tables into report.txt and `out`.
void cmd_report(const ExperimentConfig& config, std::ostream& out);

/// Retrains one manifest entry from its recorded parent and checks that the
/// checkpoint hash matches. Returns the recomputed hash.
std::string replay(const ExperimentConfig& config, ModelKind kind, int refit_year, std::ostream& log);

/// Out-of-sample forecasts for `kind` from checkpoints under the output directory.
ForecastSet forecast_from_checkpoints(const ExperimentConfig& config, const PreparedData& data, ModelKind kind);

std::filesystem::path checkpoint_path(const ExperimentConfig& config, ModelKind kind, int refit_year);
std::filesystem::path forecast_path(const ExperimentConfig& config, ModelKind kind);

}  // namespace deepseq

#endif  // DEEPSEQ_EXPERIMENT_HPP
