#include "deepseq/portfolio.hpp"

#include "deepseq/text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace deepseq {

std::string_view to_string(WeightMode m) { return m == WeightMode::equal ? "equal" : "value"; }

WeightMode parse_weight_mode(std::string_view s) {
  s = text::trim(s);
  if (s == "equal") return WeightMode::equal;
  if (s == "value") return WeightMode::value;
  throw std::invalid_argument("unknown weight mode '" + std::string(s) + "'");
}

double Holdings::long_sum() const {
  double s = 0.0;
  for (const auto& [id, w] : weights) s += w > 0.0 ? w : 0.0;
  return s;
}

double Holdings::short_sum() const {
  double s = 0.0;
  for (const auto& [id, w] : weights) s += w < 0.0 ? w : 0.0;
  return s;
}

double nyse_breakpoint(const PanelDataset& panel, Month month, double quantile) {
  std::vector<double> caps;
  for (std::size_t i : panel.rows_in_month(month)) {
    const PanelRow& r = panel.rows()[i];
    if (r.exchange == Exchange::nyse) caps.push_back(r.market_cap);
  }
  if (caps.empty()) throw DataError("no NYSE assets in " + month.str() + " for the microcap breakpoint");
  std::sort(caps.begin(), caps.end());
  const double pos = quantile * static_cast<double>(caps.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, caps.size() - 1);
  return caps[lo] + (pos - static_cast<double>(lo)) * (caps[hi] - caps[lo]);
}

Holdings form_portfolio(const std::vector<ForecastRecord>& forecasts, const PanelDataset& panel, WeightMode mode,
                        bool microcap_filter) {
  if (forecasts.empty()) throw DataError("form_portfolio: no forecasts");
  const Month target = forecasts.front().month;
  const Month formation = target.prev();

  struct Candidate {
    const ForecastRecord* f;
    double cap;
  };
  const double breakpoint = microcap_filter ? nyse_breakpoint(panel, formation) : 0.0;
  std::vector<Candidate> pool;
  pool.reserve(forecasts.size());
  for (const auto& f : forecasts) {
    if (f.month != target) {
      throw DataError("form_portfolio: forecasts target both " + target.str() + " and " + f.month.str());
    }
    const PanelRow* row = panel.find(f.asset_id, formation);
    if (row == nullptr) {
      throw DataError("form_portfolio: " + f.asset_id + " has no panel row at formation month " + formation.str());
    }
    if (microcap_filter && row->market_cap < breakpoint) continue;
    pool.push_back({&f, row->market_cap});
  }
  if (pool.size() < 10) {
    throw DataError("form_portfolio: " + std::to_string(pool.size()) + " eligible assets in " + formation.str() +
                    ", need at least 10");
  }
  std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
    if (a.f->predicted != b.f->predicted) return a.f->predicted < b.f->predicted;
    return a.f->asset_id < b.f->asset_id;
  });
  const std::size_t k = pool.size() / 10;

  Holdings h;
  h.month = formation;
  auto assign = [&](std::size_t begin, std::size_t end, double sign) {
    double total = 0.0;
    for (std::size_t i = begin; i < end; ++i) total += mode == WeightMode::equal ? 1.0 : pool[i].cap;
    for (std::size_t i = begin; i < end; ++i) {
      const double w = mode == WeightMode::equal ? 1.0 : pool[i].cap;
      h.weights[pool[i].f->asset_id] = sign * w / total;
    }
  };
  assign(0, k, -1.0);
  assign(pool.size() - k, pool.size(), 1.0);
  return h;
}

double turnover(const Holdings& prev, const std::map<std::string, double>& prev_returns, const Holdings& next) {
  double s = 0.0;
  for (const auto& [id, w] : prev.weights) {
    auto it = prev_returns.find(id);
    if (it == prev_returns.end()) {
      throw DataError("turnover: no return for held asset " + id + " after " + prev.month.str());
    }
    auto jt = next.weights.find(id);
    const double w_next = jt == next.weights.end() ? 0.0 : jt->second;
    s += std::abs(w * (1.0 + it->second) - w_next);
  }
  for (const auto& [id, w] : next.weights) {
    if (prev.weights.find(id) == prev.weights.end()) s += std::abs(w);
  }
  return 0.25 * s;
}

PerfReport perf_stats(const std::vector<double>& monthly_returns, const std::vector<double>& turnovers,
                      const PerfOptions& options) {
  const std::size_t n = monthly_returns.size();
  if (n < 2) throw DataError("perf_stats: need at least 2 monthly returns");
  const double nd = static_cast<double>(n);
  const double mean = std::accumulate(monthly_returns.begin(), monthly_returns.end(), 0.0) / nd;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (double r : monthly_returns) {
    const double d = r - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  // Rounding in the mean would otherwise leave a constant series with a tiny spread.
  const bool constant = std::all_of(monthly_returns.begin(), monthly_returns.end(),
                                    [&](double r) { return r == monthly_returns.front(); });
  if (constant) m2 = m3 = m4 = 0.0;
  const double sample_sd = std::sqrt(m2 / (nd - 1.0));
  m2 /= nd;
  m3 /= nd;
  m4 /= nd;

  PerfReport p;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  p.annualized_return = 12.0 * mean * 100.0;
  p.annualized_std = std::sqrt(12.0) * sample_sd * 100.0;
  p.sharpe = sample_sd > 0.0 ? p.annualized_return / p.annualized_std : nan;
  p.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : nan;
  p.kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - (options.excess_kurtosis ? 3.0 : 0.0) : nan;
  p.avg_turnover = turnovers.empty()
                       ? 0.0
                       : 100.0 * std::accumulate(turnovers.begin(), turnovers.end(), 0.0) /
                             static_cast<double>(turnovers.size());

  double wealth = 1.0;
  double peak = 1.0;
  double mdd = 0.0;
  for (double r : monthly_returns) {
    wealth *= 1.0 + r;
    peak = std::max(peak, wealth);
    mdd = std::max(mdd, 1.0 - wealth / peak);
  }
  p.max_drawdown = 100.0 * mdd;
  return p;
}

BacktestResult backtest(const ForecastSet& forecasts, const PanelDataset& panel, WeightMode mode,
                        bool microcap_filter, const PerfOptions& options) {
  const auto months = forecasts.by_month();
  if (months.empty()) throw DataError("backtest: no forecasts");

  BacktestResult result;
  std::vector<double> returns;
  std::vector<double> turnovers;
  Holdings prev;
  std::map<std::string, double> prev_realized;
  bool first = true;
  Month expected = months.begin()->first;
  for (const auto& [target, group] : months) {
    if (target != expected) {
      throw DataError("backtest: forecasts jump from " + expected.prev().str() + " to " + target.str());
    }
    expected = target.next();

    Holdings h = form_portfolio(group, panel, mode, microcap_filter);
    std::map<std::string, double> realized;
    for (const auto& f : group) realized.emplace(f.asset_id, f.realized);

    MonthlyPoint pt;
    pt.month = target;
    for (const auto& [id, w] : h.weights) {
      pt.ret += w * realized.at(id);
      (w > 0.0 ? pt.n_long : pt.n_short) += 1;
    }
    pt.turnover = std::numeric_limits<double>::quiet_NaN();
    if (!first) {
      pt.turnover = turnover(prev, prev_realized, h);
      turnovers.push_back(pt.turnover);
    }
    returns.push_back(pt.ret);
    result.series.push_back(pt);
    prev = std::move(h);
    prev_realized = std::move(realized);
    first = false;
  }
  result.report = perf_stats(returns, turnovers, options);
  return result;
}

void write_report_table(std::ostream& out, const std::vector<ReportColumn>& columns) {
  out << "Metric";
  for (const auto& c : columns) out << ',' << c.model;
  out << '\n';
  for (std::size_t row = 0; row < kReportRows.size(); ++row) {
    out << kReportRows[row];
    for (const auto& c : columns) {
      const PerfReport& p = c.report;
      const double values[] = {p.annualized_return, p.annualized_std, p.sharpe,      p.skewness,
                               p.kurtosis,          p.avg_turnover,   p.max_drawdown};
      out << ',' << text::format_fixed(values[row], 4);
    }
    out << '\n';
  }
}

void write_series(std::ostream& out, const std::vector<MonthlyPoint>& series) {
  out << "month,return,turnover,n_long,n_short\n";
  for (const auto& p : series) {
    out << p.month.str() << ',' << text::format_double(p.ret) << ','
        << (std::isnan(p.turnover) ? std::string() : text::format_double(p.turnover)) << ',' << p.n_long << ','
        << p.n_short << '\n';
  }
}

}  // namespace deepseq
