#ifndef DEEPSEQ_CONFIG_HPP
#define DEEPSEQ_CONFIG_HPP

#include "deepseq/data.hpp"
#include "deepseq/models.hpp"
#include "deepseq/optim.hpp"
#include "deepseq/portfolio.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace deepseq {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every knob of one experiment. Built from flat `key = value` text; see
/// config_keys() for the accepted keys and their defaults.
struct ExperimentConfig {
  /// Panel CSV; empty means the synthetic panel described by `synth`.
  std::filesystem::path panel;
  SyntheticSpec synth;
  std::vector<ModelKind> models;
  ModelSpec model;
  TrainConfig train;
  int initial_train_years = 17;
  int refit_every = 1;
  std::vector<WeightMode> portfolio_modes{WeightMode::equal, WeightMode::value};
  std::filesystem::path output{"out"};
  /// Read forecasts from here instead of <output>/forecasts.
  std::filesystem::path forecast_dir;
  std::uint64_t seed = 0;

  /// Resolved `key=value` lines in key order; the basis of hash().
  std::map<std::string, std::string> settings;

  ModelSpec spec_for(ModelKind kind) const;
  /// Settings that determine results; output locations are left out so a
  /// run reproduces under a different directory.
  std::string canonical_text() const;
  /// FNV-1a of canonical_text(), as 16 hex digits.
  std::string hash() const;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Accepted keys with their default values.
const std::map<std::string, std::string>& config_keys();

/// Parses config text ('#' starts a comment), applies `overrides` on top and
/// validates. Throws ConfigError naming the key on any unknown key or bad value.
ExperimentConfig parse_config(std::string_view text, const Overrides& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

}  // namespace deepseq

#endif  // DEEPSEQ_CONFIG_HPP
