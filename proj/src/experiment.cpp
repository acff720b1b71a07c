#include "deepseq/experiment.hpp"

#include "deepseq/checkpoint.hpp"
#include "deepseq/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

namespace deepseq {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

template <typename F>
auto in_context(const std::string& ctx, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(ctx + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(ctx + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(ctx + ": " + e.what());
  } catch (const LeakageError& e) {
    throw LeakageError(ctx + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << body;
  if (!out) throw DataError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path forecast_source(const ExperimentConfig& config, ModelKind kind) {
  if (!config.forecast_dir.empty()) return config.forecast_dir / (std::string(to_string(kind)) + ".csv");
  return forecast_path(config, kind);
}

std::string relative(const ExperimentConfig& config, const fs::path& p) {
  return p.lexically_relative(config.output).generic_string();
}

ordered_json read_manifest(const ExperimentConfig& config) {
  const fs::path path = config.output / "manifest.json";
  try {
    return ordered_json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
}

}  // namespace

fs::path checkpoint_path(const ExperimentConfig& config, ModelKind kind, int refit_year) {
  return config.output / "checkpoints" / (std::string(to_string(kind)) + "_" + std::to_string(refit_year) + ".json");
}

fs::path forecast_path(const ExperimentConfig& config, ModelKind kind) {
  return config.output / "forecasts" / (std::string(to_string(kind)) + ".csv");
}

PanelDataset load_data(const ExperimentConfig& config) {
  if (config.panel.empty()) return gen_synthetic(config.synth).panel;
  return load_panel(config.panel);
}

PreparedData prepare(const ExperimentConfig& config) {
  PreparedData d;
  d.raw = load_data(config);
  d.windows = build_all_windows(normalize_features(d.raw));
  if (d.windows.empty()) throw DataError("panel yields no 12-month windows");
  d.schedule = split_schedule(d.raw, config.initial_train_years, config.refit_every);
  return d;
}

fs::path cmd_synth(const ExperimentConfig& config, std::ostream& log) {
  const SyntheticPanel sp = gen_synthetic(config.synth);
  ensure_dir(config.output);
  const fs::path path = config.output / "panel.csv";
  write_panel(path, sp.panel);

  ordered_json j;
  j["seed"] = config.synth.seed;
  j["n_assets"] = config.synth.n_assets;
  j["n_months"] = config.synth.n_months;
  j["start"] = config.synth.start.str();
  j["momentum_coeff"] = config.synth.momentum_coeff;
  j["reversal_coeff"] = config.synth.reversal_coeff;
  j["noise_std"] = config.synth.noise_std;
  j["r2_ceiling"] = sp.oracle.r2_ceiling;
  j["return_variance"] = sp.oracle.return_variance;
  j["signal_features"] = sp.oracle.signal_features;
  write_text(config.output / "panel.oracle.json", j.dump(2) + "\n");
  log << "wrote " << sp.panel.size() << " rows to " << path.string() << " (R2 ceiling "
      << text::format_fixed(100.0 * sp.oracle.r2_ceiling, 4) << "%)\n";
  return path;
}

void cmd_train(const ExperimentConfig& config, std::ostream& log) {
  if (config.models.empty()) {
    log << "warning: no models configured; nothing to train\n";
    return;
  }
  const PreparedData data = prepare(config);
  ensure_dir(config.output / "checkpoints");
  ensure_dir(config.output / "logs");

  ordered_json manifest;
  manifest["version"] = DEEPSEQ_VERSION;
  manifest["config_hash"] = config.hash();
  manifest["seed"] = config.seed;
  manifest["config"] = config.settings;
  manifest["entries"] = ordered_json::array();
  std::vector<std::string> diverged;

  for (ModelKind kind : config.models) {
    const ModelSpec spec = config.spec_for(kind);
    const std::string name(to_string(kind));
    std::string parent;
    std::string parent_hash;
    auto on_refit = [&](const RefitResult& r) {
      const std::string ctx = name + " refit " + std::to_string(r.refit_year);
      in_context(ctx, [&] {
        Checkpoint c{spec, r.params, config.hash(), r.refit_year};
        const std::string body = checkpoint_to_json(c);
        const fs::path cp = checkpoint_path(config, kind, r.refit_year);
        write_text(cp, body);
        const fs::path lp = config.output / "logs" / (name + "_" + std::to_string(r.refit_year) + ".csv");
        r.log.write_csv(lp);

        ordered_json e;
        e["model"] = name;
        e["refit_year"] = r.refit_year;
        e["test_years"] = r.test_years;
        e["train_boundary"] = Month{r.refit_year, 1}.str();
        e["seed"] = r.seed;
        const bool warm = config.train.warm_start && !parent.empty();
        e["init"] = warm ? "warm" : "fresh";
        e["parent"] = warm ? ordered_json(parent) : ordered_json(nullptr);
        e["parent_hash"] = warm ? ordered_json(parent_hash) : ordered_json(nullptr);
        e["checkpoint"] = relative(config, cp);
        e["checkpoint_hash"] = text::hex_digest(text::fnv1a(body));
        e["log"] = relative(config, lp);
        e["status"] = std::string(to_string(r.status));
        e["best_epoch"] = r.best_epoch;
        e["epochs"] = r.log.epochs.size();
        manifest["entries"].push_back(e);

        if (r.status == FitStatus::diverged) diverged.push_back(ctx);
        parent = relative(config, cp);
        parent_hash = e["checkpoint_hash"].get<std::string>();
        log << ctx << ": " << r.log.epochs.size() << " epochs, " << to_string(r.status) << ", best epoch "
            << r.best_epoch << "\n";
        return 0;
      });
    };
    in_context(name, [&] { return rolling_fit(spec, data.windows, data.schedule, config.train, on_refit); });
  }
  write_text(config.output / "manifest.json", manifest.dump(2) + "\n");
  if (!diverged.empty()) {
    std::string what = diverged.front();
    for (std::size_t i = 1; i < diverged.size(); ++i) what += ", " + diverged[i];
    throw NumericError("training diverged (" + what + "); the last good parameters were saved");
  }
}

ForecastSet forecast_from_checkpoints(const ExperimentConfig& config, const PreparedData& data, ModelKind kind) {
  const ModelSpec spec = config.spec_for(kind);
  ForecastSet out;
  for (int refit : data.schedule.refit_years()) {
    const Checkpoint c = load_checkpoint(checkpoint_path(config, kind, refit));
    if (!(c.spec == spec)) {
      throw ShapeError("checkpoint " + checkpoint_path(config, kind, refit).string() +
                       " was trained with a different architecture");
    }
    const auto years = data.schedule.test_years_for(refit);
    std::vector<Index> rows;
    for (Index i = 0; i < data.windows.size(); ++i) {
      const int y = data.windows.target_month(i).year;
      if (std::find(years.begin(), years.end(), y) != years.end()) rows.push_back(i);
    }
    if (rows.empty()) continue;
    const WindowSet test = data.windows.subset(rows);
    out.append(make_forecasts(test, predict_values(spec, c.params, test.inputs)));
  }
  return out;
}

std::vector<MetricsRow> cmd_evaluate(const ExperimentConfig& config, std::ostream& log) {
  std::vector<MetricsRow> rows;
  if (config.models.empty()) {
    log << "warning: no models configured; nothing to evaluate\n";
    return rows;
  }
  std::optional<PreparedData> data;
  for (ModelKind kind : config.models) {
    const std::string name(to_string(kind));
    const ForecastSet f = in_context(name, [&] {
      if (!config.forecast_dir.empty()) return load_forecasts(forecast_source(config, kind));
      if (!data) data = prepare(config);
      ForecastSet fs_ = forecast_from_checkpoints(config, *data, kind);
      ensure_dir(config.output / "forecasts");
      write_forecasts(forecast_path(config, kind), fs_);
      return fs_;
    });
    rows.push_back({name, in_context(name, [&] { return mse_oos(f); }), in_context(name, [&] { return r2_oos(f); })});
  }
  ensure_dir(config.output);
  std::ostringstream table;
  write_metrics_table(table, rows);
  write_text(config.output / "evaluate.csv", table.str());
  log << table.str();
  return rows;
}

void cmd_backtest(const ExperimentConfig& config, std::ostream& log) {
  if (config.models.empty()) {
    log << "warning: no models configured; nothing to backtest\n";
    return;
  }
  const PanelDataset panel = load_data(config);
  std::vector<std::pair<std::string, ForecastSet>> forecasts;
  for (ModelKind kind : config.models) {
    const std::string name(to_string(kind));
    forecasts.emplace_back(name, in_context(name, [&] { return load_forecasts(forecast_source(config, kind)); }));
  }
  ensure_dir(config.output / "series");
  for (WeightMode mode : config.portfolio_modes) {
    for (bool filter : {false, true}) {
      const std::string tag = std::string(to_string(mode)) + "_" + (filter ? "exmicro" : "all");
      std::vector<ReportColumn> columns;
      for (const auto& [name, f] : forecasts) {
        const BacktestResult r = in_context(name + " " + tag, [&] { return backtest(f, panel, mode, filter); });
        std::ostringstream series;
        write_series(series, r.series);
        write_text(config.output / "series" / (name + "_" + tag + ".csv"), series.str());
        columns.push_back({name, r.report});
      }
      std::ostringstream table;
      write_report_table(table, columns);
      write_text(config.output / ("backtest_" + tag + ".csv"), table.str());
      log << "# " << tag << "\n" << table.str();
    }
  }
}

void cmd_report(const ExperimentConfig& config, std::ostream& out) {
  std::ostringstream report;
  report << "## Out-of-sample accuracy\n" << read_text(config.output / "evaluate.csv");
  for (WeightMode mode : config.portfolio_modes) {
    for (bool filter : {false, true}) {
      const std::string tag = std::string(to_string(mode)) + "_" + (filter ? "exmicro" : "all");
      report << "\n## " << (mode == WeightMode::equal ? "Equal" : "Value") << "-weight long-short, "
             << (filter ? "ex-microcap" : "all stocks") << "\n"
             << read_text(config.output / ("backtest_" + tag + ".csv"));
    }
  }
  write_text(config.output / "report.txt", report.str());
  out << report.str();
}

std::string replay(const ExperimentConfig& config, ModelKind kind, int refit_year, std::ostream& log) {
  const ordered_json manifest = read_manifest(config);
  if (manifest.at("config_hash").get<std::string>() != config.hash()) {
    throw ConfigError("manifest was written under config " + manifest.at("config_hash").get<std::string>() +
                      ", current config hashes to " + config.hash());
  }
  const std::string name(to_string(kind));
  const ordered_json* entry = nullptr;
  for (const auto& e : manifest.at("entries")) {
    if (e.at("model").get<std::string>() == name && e.at("refit_year").get<int>() == refit_year) entry = &e;
  }
  if (entry == nullptr) {
    throw DataError("manifest has no entry for " + name + " " + std::to_string(refit_year));
  }
  std::optional<ParamSet> warm;
  if (!entry->at("parent").is_null()) {
    const fs::path parent = config.output / entry->at("parent").get<std::string>();
    const std::string body = read_text(parent);
    if (text::hex_digest(text::fnv1a(body)) != entry->at("parent_hash").get<std::string>()) {
      throw DataError("parent checkpoint " + parent.string() + " does not match its recorded hash");
    }
    warm = checkpoint_from_json(body).params;
  }
  const PreparedData data = prepare(config);
  const ModelSpec spec = config.spec_for(kind);
  const RefitResult r = refit_once(spec, data.windows, refit_year, config.train, std::move(warm));
  const std::string hash =
      text::hex_digest(text::fnv1a(checkpoint_to_json(Checkpoint{spec, r.params, config.hash(), refit_year})));
  const std::string recorded = entry->at("checkpoint_hash").get<std::string>();
  log << name << " " << refit_year << ": replayed " << hash << (hash == recorded ? " (matches)" : " (MISMATCH, recorded ")
      << (hash == recorded ? "" : recorded + ")") << "\n";
  if (hash != recorded) {
    throw NumericError("replay of " + name + " " + std::to_string(refit_year) + " produced " + hash +
                       ", manifest records " + recorded);
  }
  return hash;
}

}  // namespace deepseq
