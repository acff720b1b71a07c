#include "deepseq/eval.hpp"

#include "deepseq/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace deepseq {

namespace {

void validate_records(const std::vector<ForecastRecord>& records) {
  std::set<std::pair<std::string, int>> seen;
  for (const auto& r : records) {
    if (!std::isfinite(r.realized) || !std::isfinite(r.predicted)) {
      throw DataError("forecast for (" + r.asset_id + ", " + r.month.str() + ") is not finite");
    }
    if (!seen.emplace(r.asset_id, r.month.index()).second) {
      throw DataError("duplicate forecast for (" + r.asset_id + ", " + r.month.str() + ")");
    }
  }
}

}  // namespace

ForecastSet::ForecastSet(std::vector<ForecastRecord> records) : records_(std::move(records)) {
  validate_records(records_);
}

std::map<Month, std::vector<ForecastRecord>> ForecastSet::by_month() const {
  std::map<Month, std::vector<ForecastRecord>> out;
  for (const auto& r : records_) out[r.month].push_back(r);
  for (auto& [m, group] : out) {
    std::sort(group.begin(), group.end(),
              [](const ForecastRecord& a, const ForecastRecord& b) { return a.asset_id < b.asset_id; });
  }
  return out;
}

void ForecastSet::append(const ForecastSet& other) {
  std::vector<ForecastRecord> merged = records_;
  merged.insert(merged.end(), other.records_.begin(), other.records_.end());
  validate_records(merged);
  records_ = std::move(merged);
}

double mse_oos(const ForecastSet& forecasts) {
  if (forecasts.empty()) throw DataError("mse_oos: empty forecast set");
  double s = 0.0;
  for (const auto& r : forecasts.records()) {
    const double e = r.realized - r.predicted;
    s += e * e;
  }
  return s / static_cast<double>(forecasts.size());
}

double r2_oos(const ForecastSet& forecasts) {
  if (forecasts.empty()) throw DataError("r2_oos: empty forecast set");
  double num = 0.0;
  double den = 0.0;
  for (const auto& r : forecasts.records()) {
    const double e = r.realized - r.predicted;
    num += e * e;
    den += r.realized * r.realized;
  }
  if (den == 0.0) throw DataError("r2_oos: every realized return is zero");
  return 1.0 - num / den;
}

ForecastSet make_forecasts(const WindowSet& windows, const Vector& predicted) {
  if (predicted.size() != windows.size()) {
    throw ShapeError("make_forecasts: " + std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(windows.size()) + " windows");
  }
  std::vector<ForecastRecord> records;
  records.reserve(static_cast<std::size_t>(windows.size()));
  for (Index i = 0; i < windows.size(); ++i) {
    records.push_back({windows.asset_ids[static_cast<std::size_t>(i)], windows.target_month(i), windows.targets(i),
                       predicted(i)});
  }
  return ForecastSet(std::move(records));
}

void write_forecasts(std::ostream& out, const ForecastSet& forecasts) {
  out << kForecastHeader << '\n';
  for (const auto& r : forecasts.records()) {
    out << r.asset_id << ',' << r.month.str() << ',' << text::format_double(r.realized) << ','
        << text::format_double(r.predicted) << '\n';
  }
}

void write_forecasts(const std::filesystem::path& path, const ForecastSet& forecasts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write forecasts " + path.string());
  write_forecasts(out, forecasts);
}

ForecastSet read_forecasts(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kForecastHeader) {
    throw DataError(std::string("forecast file: expected header '") + kForecastHeader + "'");
  }
  std::vector<ForecastRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(text::trim(line), ',');
    if (f.size() != 4) throw DataError("forecast line " + std::to_string(line_no) + ": expected 4 fields");
    ForecastRecord r;
    r.asset_id = std::string(text::trim(f[0]));
    r.month = Month::parse(f[1]);
    const auto realized = text::parse_double(f[2]);
    const auto predicted = text::parse_double(f[3]);
    if (!realized || !predicted) {
      throw DataError("forecast line " + std::to_string(line_no) + ": bad number");
    }
    r.realized = *realized;
    r.predicted = *predicted;
    records.push_back(std::move(r));
  }
  return ForecastSet(std::move(records));
}

ForecastSet load_forecasts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing forecast file " + path.string());
  return read_forecasts(in);
}

void write_metrics_table(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "Metric";
  for (const auto& r : rows) out << ',' << r.model;
  out << "\nMSE (%)";
  for (const auto& r : rows) out << ',' << text::format_fixed(100.0 * r.mse, 4);
  out << "\nR2_oos (%)";
  for (const auto& r : rows) out << ',' << text::format_fixed(100.0 * r.r2, 4);
  out << '\n';
}

}  // namespace deepseq
