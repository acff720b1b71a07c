#include "deepseq/portfolio.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace deepseq;

namespace {

const Month kFormation{2000, 6};
const Month kTarget{2000, 7};

std::string id(int i) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "S%02d", i);
  return buf;
}

// n assets at the formation month; caps and exchanges optional.
PanelDataset formation_panel(int n, const std::vector<double>& caps = {},
                             const std::vector<Exchange>& exchanges = {}) {
  std::vector<PanelRow> rows;
  for (int i = 0; i < n; ++i) {
    PanelRow r;
    r.asset_id = id(i);
    r.month = kFormation;
    r.market_cap = caps.empty() ? 10.0 : caps[static_cast<std::size_t>(i)];
    r.exchange = exchanges.empty() ? Exchange::nyse : exchanges[static_cast<std::size_t>(i)];
    rows.push_back(r);
  }
  return PanelDataset(rows);
}

std::vector<ForecastRecord> ranked_forecasts(int n) {
  std::vector<ForecastRecord> f;
  for (int i = 0; i < n; ++i) f.push_back({id(i), kTarget, 0.0, 0.01 * i});
  return f;
}

}  // namespace

TEST(FormPortfolio, EqualWeightDeciles) {
  const Holdings h = form_portfolio(ranked_forecasts(20), formation_panel(20), WeightMode::equal, false);
  EXPECT_EQ(h.month, kFormation);
  ASSERT_EQ(h.weights.size(), 4u);
  EXPECT_EQ(h.weights.at("S19"), 0.5);
  EXPECT_EQ(h.weights.at("S18"), 0.5);
  EXPECT_EQ(h.weights.at("S00"), -0.5);
  EXPECT_EQ(h.weights.at("S01"), -0.5);
}

TEST(FormPortfolio, ValueWeightWithinLegs) {
  std::vector<double> caps(20, 5.0);
  caps[19] = 3.0;
  caps[18] = 1.0;
  caps[0] = 2.0;
  caps[1] = 6.0;
  const Holdings h = form_portfolio(ranked_forecasts(20), formation_panel(20, caps), WeightMode::value, false);
  EXPECT_DOUBLE_EQ(h.weights.at("S19"), 0.75);
  EXPECT_DOUBLE_EQ(h.weights.at("S18"), 0.25);
  EXPECT_DOUBLE_EQ(h.weights.at("S00"), -0.25);
  EXPECT_DOUBLE_EQ(h.weights.at("S01"), -0.75);
}

TEST(FormPortfolio, MicrocapFilterLeavesFifteen) {
  // Caps 1..19 on NYSE plus a NASDAQ name at 0.5: five names fall below the breakpoint.
  std::vector<double> caps(20);
  std::vector<Exchange> ex(20, Exchange::nyse);
  for (int i = 0; i < 20; ++i) caps[static_cast<std::size_t>(i)] = i + 1.0;
  caps[19] = 0.5;
  ex[19] = Exchange::nasdaq;
  const PanelDataset panel = formation_panel(20, caps, ex);
  // Linear interpolation over the 19 NYSE caps: 1 + 0.2 * 18.
  EXPECT_DOUBLE_EQ(nyse_breakpoint(panel, kFormation), 4.6);

  // Forecast order by id; survivors S04..S18 (15 names), so one long and one short.
  const Holdings h = form_portfolio(ranked_forecasts(20), panel, WeightMode::equal, true);
  ASSERT_EQ(h.weights.size(), 2u);
  EXPECT_EQ(h.weights.at("S18"), 1.0);
  EXPECT_EQ(h.weights.at("S04"), -1.0);

  const Holdings all = form_portfolio(ranked_forecasts(20), panel, WeightMode::equal, false);
  EXPECT_EQ(all.weights.at("S19"), 0.5);
}

TEST(FormPortfolio, TiesAndRejections) {
  std::vector<ForecastRecord> flat = ranked_forecasts(20);
  for (auto& f : flat) f.predicted = 0.0;
  const Holdings h = form_portfolio(flat, formation_panel(20), WeightMode::equal, false);
  EXPECT_EQ(h.weights.at("S00"), -0.5);
  EXPECT_EQ(h.weights.at("S01"), -0.5);
  EXPECT_EQ(h.weights.at("S18"), 0.5);
  EXPECT_EQ(h.weights.at("S19"), 0.5);

  EXPECT_THROW(form_portfolio(ranked_forecasts(9), formation_panel(9), WeightMode::equal, false), DataError);
  EXPECT_THROW(form_portfolio({}, formation_panel(9), WeightMode::equal, false), DataError);
  std::vector<ForecastRecord> mixed = ranked_forecasts(12);
  mixed[3].month = kTarget.next();
  EXPECT_THROW(form_portfolio(mixed, formation_panel(12), WeightMode::equal, false), DataError);
  EXPECT_THROW(form_portfolio(ranked_forecasts(12), formation_panel(11), WeightMode::equal, false), DataError);
  std::vector<Exchange> nasdaq(12, Exchange::nasdaq);
  EXPECT_THROW(form_portfolio(ranked_forecasts(12), formation_panel(12, {}, nasdaq), WeightMode::equal, true),
               DataError);
}

TEST(FormPortfolio, LegsSumToOneAndMonotoneInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::lognormal_distribution<double> cap(2.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 10 + trial * 3;
    std::vector<double> caps(static_cast<std::size_t>(n));
    for (double& c : caps) c = cap(rng);
    const PanelDataset panel = formation_panel(n, caps);
    std::vector<ForecastRecord> f = ranked_forecasts(n);
    for (auto& r : f) r.predicted = u(rng);
    std::vector<ForecastRecord> g = f;
    for (auto& r : g) r.predicted = std::exp(3.0 * r.predicted) - 7.0;
    for (WeightMode m : {WeightMode::equal, WeightMode::value}) {
      const Holdings a = form_portfolio(f, panel, m, false);
      EXPECT_NEAR(a.long_sum(), 1.0, 1e-12);
      EXPECT_NEAR(a.short_sum(), -1.0, 1e-12);
      EXPECT_EQ(a.weights.size(), 2u * static_cast<std::size_t>(n / 10));
      EXPECT_EQ(a.weights, form_portfolio(g, panel, m, false).weights);
    }
  }
}

TEST(Turnover, HandExamples) {
  Holdings a{kFormation, {{"A", 0.5}, {"B", 0.5}, {"C", -0.5}, {"D", -0.5}}};
  const std::map<std::string, double> zero{{"A", 0.0}, {"B", 0.0}, {"C", 0.0}, {"D", 0.0}};
  EXPECT_EQ(turnover(a, zero, a), 0.0);

  Holdings disjoint{kTarget, {{"E", 0.5}, {"F", 0.5}, {"G", -0.5}, {"H", -0.5}}};
  EXPECT_EQ(turnover(a, zero, disjoint), 1.0);

  Holdings shifted{kTarget, {{"A", 0.6}, {"B", 0.4}, {"C", -0.5}, {"D", -0.5}}};
  EXPECT_NEAR(turnover(a, zero, shifted), 0.05, 1e-15);

  const std::map<std::string, double> up{{"A", 0.1}, {"B", 0.0}, {"C", 0.0}, {"D", 0.0}};
  EXPECT_NEAR(turnover(a, up, a), 0.25 * 0.05, 1e-15);
  EXPECT_THROW(turnover(a, {{"A", 0.0}}, a), DataError);
}

TEST(Turnover, MatchesDirectSummationAndBound) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::normal_distribution<double> g(0.0, 0.1);
  auto random_holdings = [&](Month m) {
    Holdings h{m, {}};
    double ls = 0.0, ss = 0.0;
    for (int i = 0; i < 12; ++i) {
      if (rng() % 2) continue;
      const double w = u(rng);
      if (i < 6) {
        h.weights[id(i)] = w;
        ls += w;
      } else {
        h.weights[id(i)] = -w;
        ss += w;
      }
    }
    if (ls == 0.0) h.weights[id(0)] = ls = 1.0;
    if (ss == 0.0) h.weights[id(6)] = -(ss = 1.0);
    for (auto& [k, w] : h.weights) w /= w > 0 ? ls : ss;
    return h;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const Holdings p = random_holdings(kFormation);
    const Holdings n = random_holdings(kTarget);
    std::map<std::string, double> r, zero;
    for (int i = 0; i < 12; ++i) {
      r[id(i)] = g(rng);
      zero[id(i)] = 0.0;
    }
    double direct = 0.0;
    for (int i = 0; i < 12; ++i) {
      const double wp = p.weights.contains(id(i)) ? p.weights.at(id(i)) : 0.0;
      const double wn = n.weights.contains(id(i)) ? n.weights.at(id(i)) : 0.0;
      direct += std::abs(wp * (1.0 + r[id(i)]) - wn);
    }
    EXPECT_NEAR(turnover(p, r, n), direct / 4.0, 1e-12);
    const double t0 = turnover(p, zero, n);
    EXPECT_GE(t0, 0.0);
    EXPECT_LE(t0, 1.0 + 1e-15);
  }
}

TEST(PerfStats, ConstantSeries) {
  const PerfReport p = perf_stats(std::vector<double>(24, 0.01), {});
  EXPECT_NEAR(p.annualized_return, 12.0, 1e-12);
  EXPECT_EQ(p.annualized_std, 0.0);
  EXPECT_TRUE(std::isnan(p.sharpe));
  EXPECT_EQ(p.max_drawdown, 0.0);
  EXPECT_THROW(perf_stats({0.01}, {}), DataError);
}

TEST(PerfStats, AlternatingSeries) {
  std::vector<double> r;
  for (int i = 0; i < 12; ++i) r.push_back(i % 2 ? -0.01 : 0.01);
  const PerfReport p = perf_stats(r, {0.2, 0.4});
  EXPECT_NEAR(p.annualized_return, 0.0, 1e-12);
  EXPECT_NEAR(p.annualized_std, 100.0 * std::sqrt(12.0) * std::sqrt(12.0 * 1e-4 / 11.0), 1e-12);
  EXPECT_NEAR(p.annualized_std / (100.0 * std::sqrt(12.0)), 0.01044, 1e-5);
  EXPECT_NEAR(p.skewness, 0.0, 1e-12);
  EXPECT_NEAR(p.kurtosis, 1.0, 1e-12);
  EXPECT_NEAR(perf_stats(r, {}, {true}).kurtosis, -2.0, 1e-12);
  EXPECT_NEAR(p.avg_turnover, 30.0, 1e-12);
  EXPECT_NEAR(p.max_drawdown, 100.0 * (1.0 - std::pow(1.01 * 0.99, 6) / 1.01), 1e-12);
}

TEST(PerfStats, HandComputedMoments) {
  const std::vector<double> r = {0.03, -0.01, 0.02, -0.04};
  const double mean = 0.0;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : r) {
    m2 += std::pow(x - mean, 2) / 4;
    m3 += std::pow(x - mean, 3) / 4;
    m4 += std::pow(x - mean, 4) / 4;
  }
  const PerfReport p = perf_stats(r, {});
  EXPECT_NEAR(p.skewness, m3 / std::pow(m2, 1.5), 1e-12);
  EXPECT_NEAR(p.kurtosis, m4 / (m2 * m2), 1e-12);
  const double peak = 1.03 * 0.99 * 1.02;
  const double trough = 1.03 * 0.99 * 1.02 * 0.96;
  EXPECT_NEAR(p.max_drawdown, 100.0 * (1.0 - trough / peak), 1e-12);
  std::vector<double> rising = {0.01, 0.0, 0.02, 0.005};
  EXPECT_EQ(perf_stats(rising, {}).max_drawdown, 0.0);
}

TEST(PerfStats, TimeReversalKeepsMoments) {
  std::mt19937_64 rng(8);
  std::student_t_distribution<double> t(4.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> r(60);
    for (double& x : r) x = 0.02 * t(rng);
    std::vector<double> rev(r.rbegin(), r.rend());
    const PerfReport a = perf_stats(r, {});
    const PerfReport b = perf_stats(rev, {});
    EXPECT_NEAR(a.annualized_return, b.annualized_return, 1e-10);
    EXPECT_NEAR(a.annualized_std, b.annualized_std, 1e-10);
    EXPECT_NEAR(a.skewness, b.skewness, 1e-10);
    EXPECT_NEAR(a.kurtosis, b.kurtosis, 1e-10);
  }
}

namespace {

// Random returns for n assets over `months` target months starting at kTarget.
struct Market {
  PanelDataset panel;
  std::vector<ForecastRecord> realized;
};

Market random_market(int n, int months, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.08);
  std::lognormal_distribution<double> cap(3.0, 1.0);
  std::vector<PanelRow> rows;
  Market m;
  for (int t = 0; t <= months; ++t) {
    for (int i = 0; i < n; ++i) {
      PanelRow r;
      r.asset_id = id(i);
      r.month = kFormation.plus(t);
      r.excess_return = g(rng);
      r.market_cap = cap(rng);
      r.exchange = i % 3 == 0 ? Exchange::nasdaq : Exchange::nyse;
      rows.push_back(r);
      if (t > 0) m.realized.push_back({r.asset_id, r.month, r.excess_return, 0.0});
    }
  }
  m.panel = PanelDataset(rows);
  return m;
}

}  // namespace

TEST(Backtest, OracleForecastsEarnTheDecileSpread) {
  const Market m = random_market(37, 24, 11);
  std::vector<ForecastRecord> recs = m.realized;
  for (auto& r : recs) r.predicted = r.realized;
  const BacktestResult res = backtest(ForecastSet(recs), m.panel, WeightMode::equal, false);
  ASSERT_EQ(res.series.size(), 24u);
  for (const auto& pt : res.series) {
    std::vector<double> r;
    for (const auto& rec : m.realized) {
      if (rec.month == pt.month) r.push_back(rec.realized);
    }
    std::sort(r.begin(), r.end());
    const double spread = (r[36] + r[35] + r[34]) / 3.0 - (r[0] + r[1] + r[2]) / 3.0;
    EXPECT_NEAR(pt.ret, spread, 1e-12);
    EXPECT_EQ(pt.n_long, 3u);
    EXPECT_EQ(pt.n_short, 3u);
  }
  EXPECT_TRUE(std::isnan(res.series.front().turnover));
  EXPECT_GT(res.report.sharpe, 3.0);
}

TEST(Backtest, GapAndFlatForecasts) {
  const Market m = random_market(20, 6, 12);
  std::vector<ForecastRecord> recs;
  for (const auto& r : m.realized) {
    if (r.month != kTarget.plus(2)) recs.push_back(r);
  }
  EXPECT_THROW(backtest(ForecastSet(recs), m.panel, WeightMode::equal, false), DataError);
  EXPECT_NO_THROW(backtest(ForecastSet(m.realized), m.panel, WeightMode::value, true));
}

TEST(Backtest, RandomForecastsHaveNoEdge) {
  const Market m = random_market(50, 360, 13);
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g;
  int hits = 0;
  const int trials = 10;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<ForecastRecord> recs = m.realized;
    for (auto& r : recs) r.predicted = g(rng);
    const BacktestResult res = backtest(ForecastSet(recs), m.panel, WeightMode::equal, false);
    // Annualized Sharpe standard error over 30 years is about sqrt(1/30).
    if (std::abs(res.report.sharpe) < 3.0 * std::sqrt(1.0 / 30.0)) ++hits;
    EXPECT_EQ(res.series.size(), 360u);
  }
  EXPECT_GE(hits, trials - 1);
}

TEST(Report, TableLayout) {
  PerfReport p;
  p.annualized_return = 12.3456789;
  p.sharpe = NAN;
  std::ostringstream out;
  write_report_table(out, {{"LSTM", p}, {"GRU", PerfReport{}}});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "Metric,LSTM,GRU");
  std::vector<std::string> labels;
  while (std::getline(in, line)) labels.push_back(line.substr(0, line.find(',')));
  EXPECT_EQ(labels, (std::vector<std::string>(kReportRows.begin(), kReportRows.end())));
  EXPECT_NE(out.str().find("Return (%),12.3457,0.0000"), std::string::npos);

  std::ostringstream s;
  write_series(s, {{kTarget, 0.01, NAN, 2, 2}, {kTarget.next(), -0.02, 0.5, 2, 2}});
  EXPECT_EQ(s.str(), "month,return,turnover,n_long,n_short\n2000-07,0.01,,2,2\n2000-08,-0.02,0.5,2,2\n");
}
