#ifndef DEEPSEQ_PORTFOLIO_HPP
#define DEEPSEQ_PORTFOLIO_HPP

#include "deepseq/data.hpp"
#include "deepseq/eval.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace deepseq {

enum class WeightMode { equal, value };
std::string_view to_string(WeightMode m);
WeightMode parse_weight_mode(std::string_view s);

/// Long-short weights formed at `month` (the formation month).
struct Holdings {
  Month month;
  std::map<std::string, double> weights;  // long > 0, short < 0

  double long_sum() const;
  double short_sum() const;
};

/// 20th percentile (linear interpolation) of NYSE market caps in `month`.
/// Throws DataError when no NYSE asset is present.
double nyse_breakpoint(const PanelDataset& panel, Month month, double quantile = 0.2);

/// Sorts `forecasts` (all targeting the same month T+1) by predicted return,
/// ties broken by asset id, and goes long the top n/10 and short the bottom
/// n/10. Value weights are proportional to the month-T market cap within
/// each leg. Throws DataError with fewer than 10 eligible assets.
Holdings form_portfolio(const std::vector<ForecastRecord>& forecasts, const PanelDataset& panel, WeightMode mode,
                        bool microcap_filter);

/// 1/4 sum_i |w_prev_i (1 + r_i) - w_next_i|, r_i being each previously held
/// asset's return over the holding month. Throws DataError if one is missing.
double turnover(const Holdings& prev, const std::map<std::string, double>& prev_returns, const Holdings& next);

struct PerfReport {
  double annualized_return = 0.0;  // %
  double annualized_std = 0.0;     // %
  double sharpe = 0.0;             // NaN when the series is constant
  double skewness = 0.0;
  double kurtosis = 0.0;
  double avg_turnover = 0.0;       // %
  double max_drawdown = 0.0;       // %
};

struct PerfOptions {
  bool excess_kurtosis = false;
};

/// Annualized statistics of a monthly long-short return series. `turnovers`
/// holds one value per month transition and may be empty.
PerfReport perf_stats(const std::vector<double>& monthly_returns, const std::vector<double>& turnovers,
                      const PerfOptions& options = {});

struct MonthlyPoint {
  Month month;               // month over which the return is earned
  double ret = 0.0;
  double turnover = 0.0;     // NaN for the first month
  std::size_t n_long = 0;
  std::size_t n_short = 0;
};

struct BacktestResult {
  PerfReport report;
  std::vector<MonthlyPoint> series;
};

/// Monthly rebalanced long-short backtest over consecutive target months.
/// Throws DataError on a gap in the months.
BacktestResult backtest(const ForecastSet& forecasts, const PanelDataset& panel, WeightMode mode,
                        bool microcap_filter, const PerfOptions& options = {});

inline constexpr std::array<const char*, 7> kReportRows = {
    "Return (%)", "Std.Dev(%)", "Sharpe", "Skewness", "Kurtosis", "Turnover(%)", "MDD(%)",
};

struct ReportColumn {
  std::string model;
  PerfReport report;
};

/// "Metric,<model>..." header then the seven statistic rows at four decimals.
void write_report_table(std::ostream& out, const std::vector<ReportColumn>& columns);
void write_series(std::ostream& out, const std::vector<MonthlyPoint>& series);

}  // namespace deepseq

#endif  // DEEPSEQ_PORTFOLIO_HPP
