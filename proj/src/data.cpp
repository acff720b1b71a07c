#include "deepseq/data.hpp"

#include "deepseq/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace deepseq {

namespace {

constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "A2ME",        "OA",           "AOA",      "AT",         "BEME",     "Beta_daily", "C",
    "C2D",         "CTO",          "Dept2P",   "Delta_ceq",  "Delta_GM_Sales", "Delta_So",
    "Delta_shrout", "Delta_PI2A",  "E2P",      "EPS",        "Free_CF",  "Idol_vol",   "Investment",
    "IPM",         "IVC",          "Lev",      "LDP",        "MC",       "Turnover",   "NOA",
    "NOP",         "O2P",          "OL",       "PCM",        "PM",       "Prof",       "Q",
    "Ret",         "Ret_max",      "RNA",      "ROA",        "ROC",      "ROE",        "ROIC",
    "S2C",         "Sale_g",       "SAT",      "S2P",        "SGA2S",    "Spread",     "Std_turnover",
    "Std_vol",     "Tan",          "Total_vol",
};

constexpr std::array<std::string_view, 5> kLeadingColumns = {"asset_id", "month", "excess_return", "market_cap",
                                                             "exchange"};

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
  throw DataError("panel line " + std::to_string(line) + ": " + what);
}

}  // namespace

Month Month::parse(std::string_view text) {
  text = text::trim(text);
  if (text.size() != 7 || text[4] != '-') {
    throw DataError("month '" + std::string(text) + "' is not YYYY-MM");
  }
  const auto y = text::parse_int(text.substr(0, 4));
  const auto m = text::parse_int(text.substr(5, 2));
  if (!y || !m || *m < 1 || *m > 12) {
    throw DataError("month '" + std::string(text) + "' is not YYYY-MM");
  }
  return Month{static_cast<int>(*y), static_cast<int>(*m)};
}

Month Month::from_index(int index) {
  const int y = index >= 0 ? index / 12 : -((-index + 11) / 12);
  return Month{y, index - y * 12 + 1};
}

std::string Month::str() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
  return buf;
}

std::string_view to_string(Exchange e) {
  switch (e) {
    case Exchange::nyse:
      return "NYSE";
    case Exchange::amex:
      return "AMEX";
    case Exchange::nasdaq:
      return "NASDAQ";
  }
  return "?";
}

Exchange parse_exchange(std::string_view text) {
  text = text::trim(text);
  if (text == "NYSE") return Exchange::nyse;
  if (text == "AMEX") return Exchange::amex;
  if (text == "NASDAQ") return Exchange::nasdaq;
  throw DataError("unknown exchange '" + std::string(text) + "'");
}

const std::array<std::string_view, kNumFeatures>& feature_names() { return kFeatureNames; }

std::size_t feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureNames.size(); ++i) {
    if (kFeatureNames[i] == name) return i;
  }
  throw DataError("unknown feature column '" + std::string(name) + "'");
}

PanelDataset::PanelDataset(std::vector<PanelRow> rows) : rows_(std::move(rows)) {
  std::sort(rows_.begin(), rows_.end(), [](const PanelRow& a, const PanelRow& b) {
    if (a.asset_id != b.asset_id) return a.asset_id < b.asset_id;
    return a.month < b.month;
  });
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const PanelRow& r = rows_[i];
    if (i > 0 && rows_[i - 1].asset_id == r.asset_id && rows_[i - 1].month == r.month) {
      throw DataError("duplicate row for (" + r.asset_id + ", " + r.month.str() + ")");
    }
    if (!std::isfinite(r.excess_return)) {
      throw DataError("non-finite excess return for (" + r.asset_id + ", " + r.month.str() + ")");
    }
    if (!(r.market_cap > 0.0) || !std::isfinite(r.market_cap)) {
      throw DataError("market cap must be positive for (" + r.asset_id + ", " + r.month.str() + ")");
    }
    by_asset_[r.asset_id].emplace(r.month.index(), i);
    by_month_[r.month.index()].push_back(i);
  }
}

const PanelRow* PanelDataset::find(std::string_view asset, Month month) const {
  auto it = by_asset_.find(std::string(asset));
  if (it == by_asset_.end()) return nullptr;
  auto jt = it->second.find(month.index());
  return jt == it->second.end() ? nullptr : &rows_[jt->second];
}

std::vector<std::string> PanelDataset::assets() const {
  std::vector<std::string> out;
  out.reserve(by_asset_.size());
  for (const auto& [id, months] : by_asset_) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> PanelDataset::rows_in_month(Month month) const {
  auto it = by_month_.find(month.index());
  return it == by_month_.end() ? std::vector<std::size_t>{} : it->second;
}

Month PanelDataset::first_month() const {
  if (by_month_.empty()) throw DataError("empty panel has no months");
  return Month::from_index(by_month_.begin()->first);
}

Month PanelDataset::last_month() const {
  if (by_month_.empty()) throw DataError("empty panel has no months");
  return Month::from_index(by_month_.rbegin()->first);
}

bool PanelDataset::short_history(std::string_view asset) const {
  auto it = by_asset_.find(std::string(asset));
  return it == by_asset_.end() || it->second.size() < static_cast<std::size_t>(kWindowLength);
}

std::string panel_csv_header() {
  std::string h;
  for (auto c : kLeadingColumns) {
    h += c;
    h += ',';
  }
  for (std::size_t i = 0; i < kFeatureNames.size(); ++i) {
    h += kFeatureNames[i];
    if (i + 1 < kFeatureNames.size()) h += ',';
  }
  return h;
}

PanelDataset read_panel(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw DataError("panel: missing header");
  }
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = text::split(text::trim(line), ',');
  for (std::size_t i = 0; i < kLeadingColumns.size(); ++i) {
    if (i >= header.size() || text::trim(header[i]) != kLeadingColumns[i]) {
      fail_line(1, "expected column '" + std::string(kLeadingColumns[i]) + "' at position " + std::to_string(i + 1));
    }
  }
  for (std::size_t i = kLeadingColumns.size(); i < header.size(); ++i) {
    const std::string_view name = text::trim(header[i]);
    const std::size_t want = feature_index(name);  // throws on unknown names
    if (want != i - kLeadingColumns.size()) {
      fail_line(1, "feature column '" + std::string(name) + "' out of order");
    }
  }
  if (header.size() != kLeadingColumns.size() + kNumFeatures) {
    fail_line(1, "expected " + std::to_string(kNumFeatures) + " feature columns, found " +
                     std::to_string(header.size() - kLeadingColumns.size()));
  }

  std::vector<PanelRow> rows;
  std::set<std::pair<std::string, int>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = text::trim(line);
    if (body.empty()) continue;
    const auto fields = text::split(body, ',');
    if (fields.size() != header.size()) {
      fail_line(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                             std::to_string(fields.size()));
    }
    PanelRow row;
    row.asset_id = std::string(text::trim(fields[0]));
    if (row.asset_id.empty()) fail_line(line_no, "empty asset_id");
    try {
      row.month = Month::parse(fields[1]);
      row.exchange = parse_exchange(fields[4]);
    } catch (const DataError& e) {
      fail_line(line_no, e.what());
    }
    const auto ret = text::parse_double(fields[2]);
    if (!ret || !std::isfinite(*ret)) fail_line(line_no, "bad excess_return '" + std::string(fields[2]) + "'");
    row.excess_return = *ret;
    const auto cap = text::parse_double(fields[3]);
    if (!cap || !std::isfinite(*cap) || *cap <= 0.0) {
      fail_line(line_no, "bad market_cap '" + std::string(fields[3]) + "'");
    }
    row.market_cap = *cap;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      const std::string_view cell = text::trim(fields[kLeadingColumns.size() + f]);
      if (cell.empty()) {
        row.features[f] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const auto v = text::parse_double(cell);
      if (!v || !std::isfinite(*v)) {
        fail_line(line_no, "bad value '" + std::string(cell) + "' for " + std::string(kFeatureNames[f]));
      }
      row.features[f] = *v;
    }
    if (!seen.emplace(row.asset_id, row.month.index()).second) {
      fail_line(line_no, "duplicate row for (" + row.asset_id + ", " + row.month.str() + ")");
    }
    rows.push_back(std::move(row));
  }
  return PanelDataset(std::move(rows));
}

PanelDataset load_panel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open panel file " + path.string());
  }
  return read_panel(in);
}

void write_panel(std::ostream& out, const PanelDataset& panel) {
  out << panel_csv_header() << '\n';
  for (const PanelRow& r : panel.rows()) {
    out << r.asset_id << ',' << r.month.str() << ',' << text::format_double(r.excess_return) << ','
        << text::format_double(r.market_cap) << ',' << to_string(r.exchange);
    for (double f : r.features) {
      out << ',';
      if (!std::isnan(f)) out << text::format_double(f);
    }
    out << '\n';
  }
}

void write_panel(const std::filesystem::path& path, const PanelDataset& panel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write panel file " + path.string());
  }
  write_panel(out, panel);
  if (!out) {
    throw DataError("failed writing panel file " + path.string());
  }
}

PanelDataset normalize_features(const PanelDataset& panel) {
  if (panel.empty()) {
    throw DataError("normalize_features: empty panel");
  }
  std::vector<PanelRow> rows = panel.rows();
  std::map<int, std::vector<std::size_t>> months;
  for (std::size_t i = 0; i < rows.size(); ++i) months[rows[i].month.index()].push_back(i);

  std::vector<std::pair<double, std::size_t>> present;
  for (const auto& [month, members] : months) {
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      present.clear();
      for (std::size_t i : members) {
        const double v = panel.rows()[i].features[f];
        if (std::isnan(v)) {
          rows[i].features[f] = 0.0;
        } else {
          present.emplace_back(v, i);
        }
      }
      const std::size_t n = present.size();
      if (n == 0) continue;
      std::sort(present.begin(), present.end());
      std::size_t k = 0;
      while (k < n) {
        std::size_t end = k + 1;
        while (end < n && present[end].first == present[k].first) ++end;
        // Ties share the mean of the 1-based ranks k+1 .. end.
        const double rank = 0.5 * static_cast<double>(k + 1 + end);
        const double mapped = n == 1 ? 0.0 : 2.0 * (rank - 1.0) / static_cast<double>(n - 1) - 1.0;
        for (std::size_t j = k; j < end; ++j) rows[present[j].second].features[f] = mapped;
        k = end;
      }
    }
  }
  return PanelDataset(std::move(rows));
}

WindowSet WindowSet::subset(const std::vector<Index>& rows) const {
  WindowSet out;
  out.inputs.resize(static_cast<Index>(rows.size()), inputs.cols());
  out.targets.resize(static_cast<Index>(rows.size()));
  out.asset_ids.reserve(rows.size());
  out.formation.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Index r = rows[k];
    out.inputs.row(static_cast<Index>(k)) = inputs.row(r);
    out.targets(static_cast<Index>(k)) = targets(r);
    out.asset_ids.push_back(asset_ids[static_cast<std::size_t>(r)]);
    out.formation.push_back(formation[static_cast<std::size_t>(r)]);
  }
  return out;
}

SequenceBatch WindowSet::batch(const std::vector<Index>& rows) const {
  SequenceBatch b;
  b.seq_len = kWindowLength;
  b.input_dim = static_cast<Index>(kNumFeatures);
  b.inputs.resize(static_cast<Index>(rows.size()), inputs.cols());
  b.targets.resize(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    b.inputs.row(static_cast<Index>(k)) = inputs.row(rows[k]);
    b.targets(static_cast<Index>(k)) = targets(rows[k]);
  }
  return b;
}

SequenceBatch WindowSet::all() const {
  SequenceBatch b;
  b.seq_len = kWindowLength;
  b.input_dim = static_cast<Index>(kNumFeatures);
  b.inputs = inputs;
  b.targets = targets;
  return b;
}

WindowSet empty_window_set() {
  WindowSet w;
  w.inputs.resize(0, kWindowLength * static_cast<Index>(kNumFeatures));
  w.targets.resize(0);
  return w;
}

namespace {

struct WindowRef {
  std::string asset;
  Month formation;
  std::array<const PanelRow*, kWindowLength> lags{};
  double target = 0.0;
};

bool collect_window(const PanelDataset& panel, const std::string& asset, Month t, WindowRef& out) {
  const PanelRow* next = panel.find(asset, t.next());
  if (next == nullptr) return false;
  for (Index k = 0; k < kWindowLength; ++k) {
    const PanelRow* r = panel.find(asset, t.plus(static_cast<int>(k - kWindowLength + 1)));
    if (r == nullptr) return false;
    out.lags[static_cast<std::size_t>(k)] = r;
  }
  out.asset = asset;
  out.formation = t;
  out.target = next->excess_return;
  return true;
}

WindowSet materialize(const std::vector<WindowRef>& refs) {
  const Index width = kWindowLength * static_cast<Index>(kNumFeatures);
  WindowSet w;
  w.inputs.resize(static_cast<Index>(refs.size()), width);
  w.targets.resize(static_cast<Index>(refs.size()));
  w.asset_ids.reserve(refs.size());
  w.formation.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const WindowRef& ref = refs[i];
    for (Index k = 0; k < kWindowLength; ++k) {
      const auto& feats = ref.lags[static_cast<std::size_t>(k)]->features;
      for (std::size_t f = 0; f < kNumFeatures; ++f) {
        const double v = feats[f];
        if (!std::isfinite(v)) {
          throw DataError("window for (" + ref.asset + ", " + ref.formation.str() +
                          ") has a missing feature; normalize the panel first");
        }
        w.inputs(static_cast<Index>(i), k * static_cast<Index>(kNumFeatures) + static_cast<Index>(f)) = v;
      }
    }
    w.targets(static_cast<Index>(i)) = ref.target;
    w.asset_ids.push_back(ref.asset);
    w.formation.push_back(ref.formation);
  }
  return w;
}

}  // namespace

WindowSet build_windows(const PanelDataset& panel, Month formation) {
  if (panel.empty() || formation < panel.first_month() || formation > panel.last_month()) {
    throw DataError("formation month " + formation.str() + " outside the panel range");
  }
  std::vector<WindowRef> refs;
  for (std::size_t i : panel.rows_in_month(formation)) {
    WindowRef ref;
    if (collect_window(panel, panel.rows()[i].asset_id, formation, ref)) refs.push_back(std::move(ref));
  }
  return materialize(refs);
}

WindowSet build_all_windows(const PanelDataset& panel) {
  if (panel.empty()) return empty_window_set();
  std::vector<WindowRef> refs;
  const Month first = panel.first_month().plus(static_cast<int>(kWindowLength - 1));
  for (Month t = first; t < panel.last_month(); t = t.next()) {
    for (std::size_t i : panel.rows_in_month(t)) {
      WindowRef ref;
      if (collect_window(panel, panel.rows()[i].asset_id, t, ref)) refs.push_back(std::move(ref));
    }
  }
  return materialize(refs);
}

std::vector<int> Schedule::refit_years() const {
  std::vector<int> out;
  for (const auto& e : entries) {
    if (out.empty() || out.back() != e.refit_year) out.push_back(e.refit_year);
  }
  return out;
}

std::vector<int> Schedule::test_years_for(int refit_year) const {
  std::vector<int> out;
  for (const auto& e : entries) {
    if (e.refit_year == refit_year) out.push_back(e.test_year);
  }
  return out;
}

Schedule split_schedule(int first_year, int last_year, int initial_train_years, int refit_every) {
  if (initial_train_years < 1 || refit_every < 1) {
    throw DataError("schedule: initial_train_years and refit_every must be positive");
  }
  const int span = last_year - first_year + 1;
  if (span < initial_train_years + 1) {
    throw DataError("schedule: panel spans " + std::to_string(span) + " years, need at least " +
                    std::to_string(initial_train_years + 1));
  }
  Schedule s;
  const int first_test = first_year + initial_train_years;
  for (int y = first_test; y <= last_year; ++y) {
    const int refit = first_test + ((y - first_test) / refit_every) * refit_every;
    s.entries.push_back({y, refit});
  }
  return s;
}

Schedule split_schedule(const PanelDataset& panel, int initial_train_years, int refit_every) {
  if (panel.empty()) {
    throw DataError("schedule: empty panel");
  }
  return split_schedule(panel.first_month().year, panel.last_month().year, initial_train_years, refit_every);
}

}  // namespace deepseq
