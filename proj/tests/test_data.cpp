#include "deepseq/data.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

using namespace deepseq;

namespace {

PanelRow make_row(const std::string& id, Month m, double ret = 0.01, double feature = 0.0) {
  PanelRow r;
  r.asset_id = id;
  r.month = m;
  r.excess_return = ret;
  r.market_cap = 100.0;
  r.features.fill(feature);
  return r;
}

// `n` consecutive months for each id, feature 0 = month offset + 100 * asset position.
PanelDataset toy_panel(const std::vector<std::string>& ids, Month start, int n) {
  std::vector<PanelRow> rows;
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (int m = 0; m < n; ++m) {
      PanelRow r = make_row(ids[a], start.plus(m), 0.001 * m, 0.0);
      for (std::size_t f = 0; f < kNumFeatures; ++f) r.features[f] = 100.0 * a + m + 0.001 * f;
      rows.push_back(r);
    }
  }
  return PanelDataset(rows);
}

std::string csv_row(const std::string& id, const std::string& month, const std::string& feature_cell = "0.5") {
  std::string s = id + "," + month + ",0.01,10,NYSE";
  for (std::size_t f = 0; f < kNumFeatures; ++f) s += "," + feature_cell;
  return s;
}

}  // namespace

TEST(Month, ParseFormatAndArithmetic) {
  const Month m = Month::parse("1987-01");
  EXPECT_EQ(m.year, 1987);
  EXPECT_EQ(m.month, 1);
  EXPECT_EQ(m.prev().str(), "1986-12");
  EXPECT_EQ(Month::parse("1999-12").next().str(), "2000-01");
  EXPECT_EQ(m.plus(25).str(), "1989-02");
  EXPECT_LT(Month::parse("1986-12"), m);
  for (const char* bad : {"1987-13", "1987-00", "87-01", "1987/01", "", "1987-1x"}) {
    EXPECT_THROW(Month::parse(bad), DataError) << bad;
  }
}

TEST(Features, FiftyOneFixedNames) {
  const auto& names = feature_names();
  EXPECT_EQ(names.size(), 51u);
  std::set<std::string_view> unique(names.begin(), names.end());
  EXPECT_EQ(unique.size(), 51u);
  EXPECT_EQ(names.front(), "A2ME");
  EXPECT_EQ(feature_index("A2ME"), 0u);
  EXPECT_EQ(names[feature_index("Ret")], "Ret");
  EXPECT_THROW(feature_index("NotAFeature"), DataError);
}

TEST(Panel, RejectsDuplicatesAndBadValues) {
  try {
    PanelDataset({make_row("X", Month{2000, 1}), make_row("X", Month{2000, 1})});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("(X, 2000-01)"), std::string::npos);
  }
  PanelRow cap = make_row("X", Month{2000, 1});
  cap.market_cap = 0.0;
  EXPECT_THROW(PanelDataset({cap}), DataError);
  PanelRow ret = make_row("X", Month{2000, 1}, NAN);
  EXPECT_THROW(PanelDataset({ret}), DataError);
}

TEST(Panel, IndexesAndShortHistory) {
  std::vector<PanelRow> rows;
  for (int m = 0; m < 12; ++m) rows.push_back(make_row("LONG", Month{2000, 1}.plus(m)));
  for (int m = 0; m < 11; ++m) rows.push_back(make_row("SHORT", Month{2000, 1}.plus(m)));
  std::reverse(rows.begin(), rows.end());
  const PanelDataset p(rows);
  EXPECT_EQ(p.assets(), (std::vector<std::string>{"LONG", "SHORT"}));
  EXPECT_FALSE(p.short_history("LONG"));
  EXPECT_TRUE(p.short_history("SHORT"));
  EXPECT_EQ(p.first_month(), (Month{2000, 1}));
  EXPECT_EQ(p.last_month(), (Month{2000, 12}));
  EXPECT_EQ(p.rows_in_month(Month{2000, 12}).size(), 1u);
  EXPECT_NE(p.find("SHORT", Month{2000, 11}), nullptr);
  EXPECT_EQ(p.find("SHORT", Month{2000, 12}), nullptr);
}

TEST(Csv, EmptyFileWithHeader) {
  std::istringstream in(panel_csv_header() + "\n");
  EXPECT_TRUE(read_panel(in).empty());
}

TEST(Csv, RoundTripIsExact) {
  SyntheticSpec spec;
  spec.n_assets = 3;
  spec.n_months = 14;
  spec.seed = 9;
  PanelDataset panel = gen_synthetic(spec).panel;
  std::vector<PanelRow> rows = panel.rows();
  rows[4].features[7] = NAN;
  rows[5].excess_return = 1.0 / 3.0;
  panel = PanelDataset(rows);
  std::stringstream buf;
  write_panel(buf, panel);
  const PanelDataset back = read_panel(buf);
  EXPECT_EQ(back.size(), 42u);
  EXPECT_EQ(back.assets().size(), 3u);
  ASSERT_EQ(back.size(), panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const PanelRow& a = panel.rows()[i];
    const PanelRow& b = back.rows()[i];
    EXPECT_EQ(a.asset_id, b.asset_id);
    EXPECT_EQ(a.month, b.month);
    EXPECT_EQ(a.excess_return, b.excess_return);
    EXPECT_EQ(a.market_cap, b.market_cap);
    EXPECT_EQ(a.exchange, b.exchange);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      if (std::isnan(a.features[f])) {
        EXPECT_TRUE(std::isnan(b.features[f]));
      } else {
        EXPECT_EQ(a.features[f], b.features[f]);
      }
    }
  }
}

TEST(Csv, ErrorsCarryLineNumbers) {
  auto expect_error = [](const std::string& text, const std::string& needle) {
    std::istringstream in(text);
    try {
      read_panel(in);
      ADD_FAILURE() << "expected DataError for " << needle;
    } catch (const DataError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  const std::string h = panel_csv_header() + "\n";
  expect_error(h + csv_row("A", "2000-01") + "\n" + csv_row("A", "2000-13") + "\n", "line 3");
  expect_error(h + csv_row("A", "2000-01") + "\nA,2000-02,0.1\n", "line 3");
  expect_error(h + csv_row("A", "2000-01") + "\n" + csv_row("A", "2000-01") + "\n", "duplicate");
  expect_error(h + csv_row("A", "2000-01", "abc") + "\n", "line 2");
  std::string unknown = panel_csv_header();
  unknown.replace(unknown.rfind(','), std::string::npos, ",Mystery");
  expect_error(unknown + "\n", "Mystery");
  expect_error("", "header");
}

TEST(Csv, EmptyCellIsMissing) {
  std::istringstream in(panel_csv_header() + "\n" + csv_row("A", "2000-01", "") + "\n");
  const PanelDataset p = read_panel(in);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_TRUE(std::isnan(p.rows()[0].features[0]));
}

TEST(Normalize, RankExamples) {
  const Month m{2000, 1};
  std::vector<PanelRow> rows;
  const double values[] = {20, 10, 30};
  for (int a = 0; a < 3; ++a) {
    PanelRow r = make_row("A" + std::to_string(a), m);
    r.features[0] = values[a];
    r.features[1] = 5.0;  // all tied
    rows.push_back(r);
  }
  const PanelDataset n = normalize_features(PanelDataset(rows));
  EXPECT_EQ(n.find("A0", m)->features[0], 0.0);
  EXPECT_EQ(n.find("A1", m)->features[0], -1.0);
  EXPECT_EQ(n.find("A2", m)->features[0], 1.0);
  for (int a = 0; a < 3; ++a) EXPECT_EQ(n.find("A" + std::to_string(a), m)->features[1], 0.0);
}

TEST(Normalize, MissingValueAmongFour) {
  const Month m{2000, 1};
  std::vector<PanelRow> rows;
  const double values[] = {3.0, NAN, 1.0, 2.0};
  for (int a = 0; a < 4; ++a) {
    PanelRow r = make_row("A" + std::to_string(a), m);
    r.features[0] = values[a];
    rows.push_back(r);
  }
  const PanelDataset n = normalize_features(PanelDataset(rows));
  EXPECT_EQ(n.find("A0", m)->features[0], 1.0);
  EXPECT_EQ(n.find("A1", m)->features[0], 0.0);
  EXPECT_EQ(n.find("A2", m)->features[0], -1.0);
  EXPECT_EQ(n.find("A3", m)->features[0], 0.0);
}

TEST(Normalize, PartialTiesAndLoneAsset) {
  const Month m{2000, 1};
  std::vector<PanelRow> rows;
  const double values[] = {1.0, 2.0, 2.0, 4.0, 5.0};
  for (int a = 0; a < 5; ++a) {
    PanelRow r = make_row("A" + std::to_string(a), m);
    r.features[0] = values[a];
    rows.push_back(r);
  }
  rows.push_back(make_row("SOLO", Month{2000, 2}, 0.0, 42.0));
  const PanelDataset n = normalize_features(PanelDataset(rows));
  // Ranks 1, 2.5, 2.5, 4, 5 mapped by 2(r-1)/(n-1) - 1.
  EXPECT_DOUBLE_EQ(n.find("A1", m)->features[0], 2 * 1.5 / 4 - 1);
  EXPECT_DOUBLE_EQ(n.find("A2", m)->features[0], 2 * 1.5 / 4 - 1);
  EXPECT_DOUBLE_EQ(n.find("A3", m)->features[0], 0.5);
  for (double v : n.find("SOLO", Month{2000, 2})->features) EXPECT_EQ(v, 0.0);
}

TEST(Normalize, BoundedWithZeroMedianForOddCounts) {
  SyntheticSpec spec;
  spec.n_assets = 31;
  spec.n_months = 20;
  const PanelDataset n = normalize_features(gen_synthetic(spec).panel);
  for (Month m = n.first_month(); m <= n.last_month(); m = m.next()) {
    const auto idx = n.rows_in_month(m);
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      std::vector<double> col;
      for (std::size_t i : idx) col.push_back(n.rows()[i].features[f]);
      for (double v : col) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
      }
      std::nth_element(col.begin(), col.begin() + col.size() / 2, col.end());
      EXPECT_EQ(col[col.size() / 2], 0.0);
    }
  }
  EXPECT_THROW(normalize_features(PanelDataset()), DataError);
}

TEST(Windows, FourteenMonthsGiveTwo) {
  const PanelDataset p = toy_panel({"A"}, Month{2000, 1}, 14);
  const WindowSet ws = build_all_windows(p);
  ASSERT_EQ(ws.size(), 2);
  EXPECT_EQ(ws.formation[0], (Month{2000, 12}));
  EXPECT_EQ(ws.formation[1], (Month{2001, 1}));
  EXPECT_EQ(ws.target_month(1), (Month{2001, 2}));
  // Oldest month first: step t of the first window is month offset t.
  for (Index t = 0; t < 12; ++t) EXPECT_EQ(ws.inputs(0, t * 51), static_cast<double>(t));
  EXPECT_EQ(ws.inputs(0, 11 * 51 + 50), 11.0 + 0.05);
  EXPECT_EQ(ws.targets(0), 0.001 * 12);
  EXPECT_EQ(ws.targets(1), 0.001 * 13);
}

TEST(Windows, BoundaryAndGapRules) {
  std::vector<PanelRow> rows;
  for (int m = 0; m < 13; ++m) rows.push_back(make_row("EXACT", Month{2000, 1}.plus(m)));
  for (int m = 0; m < 13; ++m) {
    if (m != 8) rows.push_back(make_row("GAP", Month{2000, 1}.plus(m)));
  }
  for (int m = 0; m < 12; ++m) rows.push_back(make_row("NOTARGET", Month{2000, 1}.plus(m)));
  const PanelDataset p(rows);
  const WindowSet ws = build_windows(p, Month{2000, 12});
  EXPECT_EQ(ws.asset_ids, std::vector<std::string>{"EXACT"});
  EXPECT_THROW(build_windows(p, Month{2001, 6}), DataError);
  EXPECT_THROW(build_windows(p, Month{1999, 6}), DataError);
}

TEST(Windows, CountMatchesExhaustiveCheck) {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution keep(0.85);
  std::vector<PanelRow> rows;
  for (int a = 0; a < 8; ++a) {
    for (int m = 0; m < 30; ++m) {
      if (keep(rng)) rows.push_back(make_row("A" + std::to_string(a), Month{2000, 1}.plus(m)));
    }
  }
  const PanelDataset p(rows);
  const WindowSet all = build_all_windows(p);
  Index total = 0;
  for (Month t = p.first_month(); t <= p.last_month(); t = t.next()) {
    Index expected = 0;
    for (const auto& id : p.assets()) {
      bool ok = p.find(id, t.next()) != nullptr;
      for (int k = 0; k < 12 && ok; ++k) ok = p.find(id, t.plus(-k)) != nullptr;
      expected += ok;
    }
    EXPECT_EQ(build_windows(p, t).size(), expected) << t.str();
    total += expected;
  }
  EXPECT_EQ(all.size(), total);
}

TEST(Windows, FutureRowsDoNotEnterWindow) {
  PanelDataset p = toy_panel({"A", "B"}, Month{2000, 1}, 20);
  const Month t{2000, 12};
  const WindowSet before = build_windows(p, t);
  std::vector<PanelRow> rows = p.rows();
  for (auto& r : rows) {
    if (r.month > t.next()) {
      r.features.fill(999.0);
      r.excess_return = -0.5;
    }
    if (r.month == t.next()) r.features.fill(-999.0);
  }
  const WindowSet after = build_windows(PanelDataset(rows), t);
  EXPECT_EQ(before.inputs, after.inputs);
  EXPECT_EQ(before.targets, after.targets);
}

TEST(Windows, NonFiniteFeatureRejected) {
  PanelDataset p = toy_panel({"A"}, Month{2000, 1}, 13);
  std::vector<PanelRow> rows = p.rows();
  rows[3].features[2] = NAN;
  EXPECT_THROW(build_all_windows(PanelDataset(rows)), DataError);
  EXPECT_NO_THROW(build_all_windows(normalize_features(PanelDataset(rows))));
}

TEST(Windows, SubsetAndBatch) {
  const WindowSet ws = build_all_windows(toy_panel({"A", "B", "C"}, Month{2000, 1}, 15));
  ASSERT_EQ(ws.size(), 9);
  const WindowSet s = ws.subset({4, 0});
  EXPECT_EQ(s.asset_ids[0], ws.asset_ids[4]);
  EXPECT_EQ(s.inputs.row(1), ws.inputs.row(0));
  const SequenceBatch b = ws.batch({2});
  EXPECT_EQ(b.seq_len, 12);
  EXPECT_EQ(b.input_dim, 51);
  EXPECT_EQ(b.targets(0), ws.targets(2));
  EXPECT_EQ(ws.formation[0], ws.formation[2]);
  EXPECT_LT(ws.formation[2], ws.formation[3]);
}

TEST(Schedule, FullSampleSpan) {
  const Schedule s = split_schedule(1970, 2016, 17, 1);
  ASSERT_EQ(s.entries.size(), 30u);
  EXPECT_EQ(s.entries.front().test_year, 1987);
  EXPECT_EQ(s.entries.back().test_year, 2016);
  EXPECT_EQ(s.refit_years().size(), 30u);
  EXPECT_EQ(s.entries.front().train_end_year(), 1986);

  const Schedule one = split_schedule(1970, 2016, 17, 30);
  EXPECT_EQ(one.refit_years(), std::vector<int>{1987});
  EXPECT_EQ(one.test_years_for(1987).size(), 30u);

  const Schedule three = split_schedule(1970, 1979, 5, 2);
  EXPECT_EQ(three.refit_years(), (std::vector<int>{1975, 1977, 1979}));
  EXPECT_EQ(three.test_years_for(1977), (std::vector<int>{1977, 1978}));
}

TEST(Schedule, ToyAndErrors) {
  const PanelDataset p = toy_panel({"A"}, Month{2001, 1}, 36);
  const Schedule s = split_schedule(p, 1, 1);
  ASSERT_EQ(s.entries.size(), 2u);
  EXPECT_EQ(s.entries[0].test_year, 2002);
  EXPECT_EQ(s.entries[1].test_year, 2003);
  EXPECT_THROW(split_schedule(p, 3, 1), DataError);
  EXPECT_THROW(split_schedule(p, 1, 0), DataError);
  EXPECT_THROW(split_schedule(PanelDataset(), 1, 1), DataError);
}

TEST(Synthetic, ShapeAndDeterminism) {
  SyntheticSpec spec;
  spec.n_assets = 50;
  spec.n_months = 120;
  spec.seed = 3;
  const SyntheticPanel a = gen_synthetic(spec);
  const SyntheticPanel b = gen_synthetic(spec);
  EXPECT_EQ(a.panel.size(), 6000u);
  EXPECT_EQ(a.panel.assets().size(), 50u);
  std::stringstream sa, sb;
  write_panel(sa, a.panel);
  write_panel(sb, b.panel);
  EXPECT_EQ(sa.str(), sb.str());
  spec.seed = 4;
  std::stringstream sc;
  write_panel(sc, gen_synthetic(spec).panel);
  EXPECT_NE(sa.str(), sc.str());
  EXPECT_EQ(a.oracle.signal_features, (std::vector<std::string>{"Ret", "Ret_max"}));
}

TEST(Synthetic, RejectsDegenerateSpecs) {
  SyntheticSpec spec;
  spec.noise_std = -0.01;
  EXPECT_THROW(spec.validate(), DataError);
  spec = SyntheticSpec{};
  spec.n_months = 13;
  EXPECT_THROW(spec.validate(), DataError);
  spec.n_months = 14;
  EXPECT_NO_THROW(spec.validate());
  spec.n_assets = 1;
  EXPECT_THROW(spec.validate(), DataError);
  spec = SyntheticSpec{};
  spec.momentum_coeff = 1.5;
  EXPECT_THROW(spec.validate(), DataError);
}

TEST(Synthetic, ReturnsFollowTheDocumentedRule) {
  SyntheticSpec spec;
  spec.n_assets = 20;
  spec.n_months = 200;
  spec.momentum_coeff = 0.3;
  spec.reversal_coeff = -0.1;
  const PanelDataset p = gen_synthetic(spec).panel;
  double sse = 0.0;
  Index n = 0;
  for (const auto& id : p.assets()) {
    for (Month t = p.first_month().plus(11); t < p.last_month(); t = t.next()) {
      auto r = [&](int lag) { return p.find(id, t.plus(-lag))->excess_return; };
      const double pred = 0.3 * (r(0) + r(1) + r(2)) / 3.0 - 0.1 * r(11);
      const double e = p.find(id, t.next())->excess_return - pred;
      sse += e * e;
      ++n;
      EXPECT_EQ(p.find(id, t)->features[feature_index("Ret")], r(0));
    }
  }
  EXPECT_NEAR(std::sqrt(sse / static_cast<double>(n)), 0.05, 0.002);
}

TEST(Synthetic, CeilingMatchesMonteCarlo) {
  const double a = 0.3, b = -0.1, sigma = 0.05;
  const SyntheticOracle o = synthetic_oracle(a, b, sigma);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> r(13, 0.0);
  double signal_ss = 0.0, total_ss = 0.0;
  const int burn = 1000, draws = 1000000;
  for (int t = 0; t < burn + draws; ++t) {
    const std::size_t k = r.size();
    const double pred = a * (r[k - 1] + r[k - 2] + r[k - 3]) / 3.0 + b * r[k - 12];
    const double next = pred + g(rng);
    if (t >= burn) {
      signal_ss += (next - pred) * (next - pred);
      total_ss += next * next;
    }
    r.push_back(next);
    if (r.size() > 64) r.erase(r.begin(), r.end() - 13);
  }
  const double mc = 1.0 - signal_ss / total_ss;
  EXPECT_NEAR(o.r2_ceiling, mc, 0.006);
  EXPECT_GT(o.r2_ceiling, 0.0);
  EXPECT_NEAR(o.return_variance, total_ss / draws, 0.03 * total_ss / draws);
}

TEST(Synthetic, CeilingEdgeCases) {
  EXPECT_EQ(synthetic_oracle(0.0, 0.0, 0.05).r2_ceiling, 0.0);
  EXPECT_EQ(synthetic_oracle(0.3, -0.1, 0.0).r2_ceiling, 1.0);
  EXPECT_GT(synthetic_oracle(0.6, -0.3, 0.05).r2_ceiling, synthetic_oracle(0.3, -0.1, 0.05).r2_ceiling);
}

TEST(Synthetic, NoiselessRuleIsPerfectlyPredictable) {
  SyntheticSpec spec;
  spec.n_assets = 5;
  spec.n_months = 60;
  spec.noise_std = 0.0;
  const PanelDataset p = gen_synthetic(spec).panel;
  double sse = 0.0, sst = 0.0;
  for (const auto& id : p.assets()) {
    for (Month t = p.first_month().plus(11); t < p.last_month(); t = t.next()) {
      auto r = [&](int lag) { return p.find(id, t.plus(-lag))->excess_return; };
      const double pred = spec.momentum_coeff * (r(0) + r(1) + r(2)) / 3.0 + spec.reversal_coeff * r(11);
      const double y = p.find(id, t.next())->excess_return;
      sse += (y - pred) * (y - pred);
      sst += y * y;
    }
  }
  ASSERT_GT(sst, 0.0);
  EXPECT_NEAR(1.0 - sse / sst, 1.0, 1e-12);
}
