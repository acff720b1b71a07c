#ifndef DEEPSEQ_DATA_HPP
#define DEEPSEQ_DATA_HPP

#include "deepseq/models.hpp"
#include "deepseq/tensor.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace deepseq {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Calendar month. Ordered chronologically.
struct Month {
  int year = 1970;
  int month = 1;  // 1..12

  /// Parses "YYYY-MM".
  static Month parse(std::string_view text);
  static Month from_index(int index);

  /// Months since year 0: year * 12 + (month - 1).
  int index() const { return year * 12 + (month - 1); }
  Month plus(int months) const { return from_index(index() + months); }
  Month next() const { return plus(1); }
  Month prev() const { return plus(-1); }
  std::string str() const;

  friend auto operator<=>(const Month& a, const Month& b) { return a.index() <=> b.index(); }
  friend bool operator==(const Month& a, const Month& b) { return a.index() == b.index(); }
};

enum class Exchange { nyse, amex, nasdaq };

std::string_view to_string(Exchange e);
Exchange parse_exchange(std::string_view text);

inline constexpr std::size_t kNumFeatures = 51;
inline constexpr Index kWindowLength = 12;

/// The 51 firm characteristics in their fixed column order.
const std::array<std::string_view, kNumFeatures>& feature_names();
/// Column position of a feature name; throws DataError for unknown names.
std::size_t feature_index(std::string_view name);

/// One asset-month observation. Missing characteristics are NaN until
/// normalize_features maps them to 0.
struct PanelRow {
  std::string asset_id;
  Month month;
  double excess_return = 0.0;
  double market_cap = 1.0;
  Exchange exchange = Exchange::nyse;
  std::array<double, kNumFeatures> features{};
};

class PanelDataset {
 public:
  PanelDataset() = default;
  /// Sorts rows by (asset, month). Throws DataError on a duplicated
  /// (asset, month) pair, a non-positive market cap or a non-finite return.
  explicit PanelDataset(std::vector<PanelRow> rows);

  const std::vector<PanelRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  const PanelRow* find(std::string_view asset, Month month) const;
  /// Asset ids in sorted order.
  std::vector<std::string> assets() const;
  /// Row positions for every asset present in `month`, sorted by asset id.
  std::vector<std::size_t> rows_in_month(Month month) const;

  Month first_month() const;
  Month last_month() const;
  /// Assets with fewer than 12 monthly observations.
  bool short_history(std::string_view asset) const;

 private:
  std::vector<PanelRow> rows_;
  std::unordered_map<std::string, std::map<int, std::size_t>> by_asset_;
  std::map<int, std::vector<std::size_t>> by_month_;
};

/// Header line of the panel CSV, without a trailing newline.
std::string panel_csv_header();

PanelDataset read_panel(std::istream& in);
PanelDataset load_panel(const std::filesystem::path& path);
void write_panel(std::ostream& out, const PanelDataset& panel);
void write_panel(const std::filesystem::path& path, const PanelDataset& panel);

/// Per month and feature: average-rank transform of the non-missing values
/// onto [-1, 1]; missing values become 0, as does a lone observation.
PanelDataset normalize_features(const PanelDataset& panel);

/// Feature windows with their next-month targets. Row i of `inputs` is the
/// 12 x 51 window of asset_ids[i] formed at formation[i], oldest month first.
struct WindowSet {
  Matrix inputs;
  Vector targets;
  std::vector<std::string> asset_ids;
  std::vector<Month> formation;

  Index size() const { return inputs.rows(); }
  bool empty() const { return size() == 0; }
  Month target_month(Index i) const { return formation.at(static_cast<std::size_t>(i)).next(); }

  WindowSet subset(const std::vector<Index>& rows) const;
  SequenceBatch batch(const std::vector<Index>& rows) const;
  SequenceBatch all() const;
};

WindowSet empty_window_set();

/// One window per asset with all of months T-11..T present and a return at
/// T+1, in asset-id order.
WindowSet build_windows(const PanelDataset& panel, Month formation);

/// build_windows over every feasible formation month, formation-major.
WindowSet build_all_windows(const PanelDataset& panel);

struct SyntheticSpec {
  Index n_assets = 200;
  Index n_months = 240;
  double momentum_coeff = 0.3;
  double reversal_coeff = -0.1;
  double noise_std = 0.05;
  std::uint64_t seed = 0;
  Month start{1970, 1};

  void validate() const;
};

struct SyntheticOracle {
  /// Best attainable zero-benchmark R^2: signal variance over total variance.
  double r2_ceiling = 0.0;
  /// Stationary variance of the generated returns.
  double return_variance = 0.0;
  std::vector<std::string> signal_features;
};

struct SyntheticPanel {
  PanelDataset panel;
  SyntheticOracle oracle;
};

/// Panel whose returns follow
///   r_{t+1} = a * mean(r_t, r_{t-1}, r_{t-2}) + b * r_{t-11} + eps,
/// eps ~ N(0, noise_std^2), independently per asset. "Ret" is r_t itself and
/// "Ret_max" a noisy copy of it; every other characteristic is pure noise.
SyntheticPanel gen_synthetic(const SyntheticSpec& spec);

/// Closed-form ceiling from the Yule-Walker autocovariances of the return
/// recursion.
SyntheticOracle synthetic_oracle(double momentum_coeff, double reversal_coeff, double noise_std);

/// For each test year: the last year whose targets may enter training.
struct ScheduleEntry {
  int test_year = 0;
  int refit_year = 0;  // year whose refit produced the parameters used
  int train_end_year() const { return refit_year - 1; }
};

struct Schedule {
  std::vector<ScheduleEntry> entries;

  std::vector<int> refit_years() const;
  std::vector<int> test_years_for(int refit_year) const;
};

/// Test years follow the first `initial_train_years` calendar years of the
/// panel; parameters are refit every `refit_every` test years.
Schedule split_schedule(const PanelDataset& panel, int initial_train_years, int refit_every);
Schedule split_schedule(int first_year, int last_year, int initial_train_years, int refit_every);

}  // namespace deepseq

#endif  // DEEPSEQ_DATA_HPP
