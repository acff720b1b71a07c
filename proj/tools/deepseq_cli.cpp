#include "deepseq/config.hpp"
#include "deepseq/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kData = 2, kNumeric = 3 };

struct Stage {
  CLI::App* app = nullptr;
  std::string config_file;
  std::map<std::string, std::optional<std::string>> overrides;
};

void add_config_options(Stage& s) {
  s.app->add_option("-c,--config", s.config_file, "Flat key = value config file");
  for (const auto& [key, def] : deepseq::config_keys()) {
    auto& slot = s.overrides[key];
    s.app->add_option("--" + key, slot, "default: " + (def.empty() ? std::string("(empty)") : def));
  }
}

deepseq::ExperimentConfig resolve(const Stage& s) {
  deepseq::Overrides overrides;
  for (const auto& [key, value] : s.overrides) {
    if (value) overrides.emplace_back(key, *value);
  }
  if (s.config_file.empty()) return deepseq::parse_config("", overrides);
  return deepseq::load_config(s.config_file, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep sequence models for cross-sectional return forecasting"};
  app.set_version_flag("--version", std::string(DEEPSEQ_VERSION));
  app.require_subcommand(1);

  std::map<std::string, Stage> stages;
  const std::map<std::string, std::string> help = {
      {"synth", "Write a synthetic panel and its oracle sidecar"},
      {"train", "Rolling refits for every configured model"},
      {"evaluate", "Out-of-sample MSE and R2 table"},
      {"backtest", "Decile long-short portfolio tables"},
      {"report", "Collect the evaluation and backtest tables"},
      {"run", "train, evaluate, backtest and report in sequence"},
      {"replay", "Retrain one manifest entry and verify its checkpoint hash"},
  };
  for (const auto& [name, text] : help) {
    Stage& s = stages[name];
    s.app = app.add_subcommand(name, text);
    add_config_options(s);
  }
  std::string replay_model;
  int replay_year = 0;
  stages["replay"].app->add_option("--model", replay_model, "Model name")->required();
  stages["replay"].app->add_option("--year", replay_year, "Refit year")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version exit 0; any malformed command line is a config error.
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    for (auto& [name, s] : stages) {
      if (!s.app->parsed()) continue;
      const deepseq::ExperimentConfig config = resolve(s);
      if (name == "synth") {
        deepseq::cmd_synth(config, std::cerr);
      } else if (name == "train") {
        deepseq::cmd_train(config, std::cerr);
      } else if (name == "evaluate") {
        deepseq::cmd_evaluate(config, std::cout);
      } else if (name == "backtest") {
        deepseq::cmd_backtest(config, std::cout);
      } else if (name == "report") {
        deepseq::cmd_report(config, std::cout);
      } else if (name == "run") {
        deepseq::cmd_train(config, std::cerr);
        if (!config.models.empty()) {
          deepseq::cmd_evaluate(config, std::cerr);
          deepseq::cmd_backtest(config, std::cerr);
          deepseq::cmd_report(config, std::cout);
        }
      } else if (name == "replay") {
        deepseq::replay(config, deepseq::parse_model_kind(replay_model), replay_year, std::cout);
      }
    }
  } catch (const deepseq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const deepseq::ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const deepseq::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const deepseq::LeakageError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const deepseq::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  }
  return kOk;
}
