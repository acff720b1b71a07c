#ifndef DEEPSEQ_EVAL_HPP
#define DEEPSEQ_EVAL_HPP

#include "deepseq/data.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace deepseq {

/// Forecast of the excess return of `asset_id` over `month` (the target month).
struct ForecastRecord {
  std::string asset_id;
  Month month;
  double realized = 0.0;
  double predicted = 0.0;
};

class ForecastSet {
 public:
  ForecastSet() = default;
  /// Throws DataError on a repeated (asset, month) or a non-finite value.
  explicit ForecastSet(std::vector<ForecastRecord> records);

  const std::vector<ForecastRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Records grouped by target month, each group in asset-id order.
  std::map<Month, std::vector<ForecastRecord>> by_month() const;

  /// Merges disjoint sets; overlapping keys are rejected.
  void append(const ForecastSet& other);

 private:
  std::vector<ForecastRecord> records_;
};

/// sum((r - r_hat)^2) / n.
double mse_oos(const ForecastSet& forecasts);
/// 1 - sum((r - r_hat)^2) / sum(r^2); the benchmark is the zero forecast.
/// Throws DataError when every realized return is zero.
double r2_oos(const ForecastSet& forecasts);

/// Builds the forecast set from windows: predicted[i] forecasts targets[i].
ForecastSet make_forecasts(const WindowSet& windows, const Vector& predicted);

inline constexpr const char* kForecastHeader = "asset_id,month,realized,predicted";
void write_forecasts(std::ostream& out, const ForecastSet& forecasts);
void write_forecasts(const std::filesystem::path& path, const ForecastSet& forecasts);
ForecastSet read_forecasts(std::istream& in);
ForecastSet load_forecasts(const std::filesystem::path& path);

struct MetricsRow {
  std::string model;
  double mse = 0.0;
  double r2 = 0.0;
};

/// Two-row table "MSE (%)" / "R2_oos (%)", one column per model, values x100
/// at four decimals.
void write_metrics_table(std::ostream& out, const std::vector<MetricsRow>& rows);

}  // namespace deepseq

#endif  // DEEPSEQ_EVAL_HPP
