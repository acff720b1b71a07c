#include "deepseq/config.hpp"

#include "deepseq/text.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace deepseq {

const std::map<std::string, std::string>& config_keys() {
  static const std::map<std::string, std::string> keys = {
      {"panel", ""},
      {"models", "DNN,RNN,LSTM,GRU,BiLSTM,LSTM_ATT,Transformer"},
      {"output", "out"},
      {"seed", "0"},
      {"forecast_dir", ""},
      {"synth.n_assets", "200"},
      {"synth.n_months", "240"},
      {"synth.momentum_coeff", "0.3"},
      {"synth.reversal_coeff", "-0.1"},
      {"synth.noise_std", "0.05"},
      {"synth.start", "1970-01"},
      {"train.learning_rate", "0.001"},
      {"train.dropout_rate", "0.2"},
      {"train.l2_coefficient", "0.0005"},
      {"train.batch_size", "2048"},
      {"train.max_epochs", "100"},
      {"train.patience", "5"},
      {"train.clip_norm", "5"},
      {"train.valid_fraction", "0.1"},
      {"train.warm_start", "true"},
      {"model.hidden_dim", "32"},
      {"model.num_layers", "2"},
      {"model.dnn_dims", "256,64,8"},
      {"model.dnn_input", "window"},
      {"model.dnn_activation", "tanh"},
      {"model.embed_dim", "256"},
      {"model.ff_dim", "64"},
      {"model.num_heads", "4"},
      {"model.num_blocks", "1"},
      {"model.positional_encoding", "true"},
      {"schedule.initial_train_years", "17"},
      {"schedule.refit_every", "1"},
      {"portfolio.modes", "equal,value"},
  };
  return keys;
}

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
  throw ConfigError("config key '" + key + "': " + why + " (got '" + value + "')");
}

double get_double(const std::map<std::string, std::string>& s, const std::string& key) {
  const std::string& v = s.at(key);
  const auto d = text::parse_double(v);
  if (!d || !std::isfinite(*d)) bad(key, v, "expected a number");
  return *d;
}

std::int64_t get_int(const std::map<std::string, std::string>& s, const std::string& key, std::int64_t min) {
  const std::string& v = s.at(key);
  const auto i = text::parse_int(v);
  if (!i) bad(key, v, "expected an integer");
  if (*i < min) bad(key, v, "must be at least " + std::to_string(min));
  return *i;
}

bool get_bool(const std::map<std::string, std::string>& s, const std::string& key) {
  const std::string& v = s.at(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, v, "expected true or false");
}

std::vector<std::string> get_list(const std::map<std::string, std::string>& s, const std::string& key) {
  std::vector<std::string> out;
  for (auto part : text::split(s.at(key), ',')) {
    part = text::trim(part);
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

void assign(std::map<std::string, std::string>& settings, std::string key, std::string_view value,
            const std::string& where) {
  key = std::string(text::trim(key));
  if (config_keys().find(key) == config_keys().end()) {
    throw ConfigError(where + "unknown config key '" + key + "'");
  }
  settings[key] = std::string(text::trim(value));
}

ExperimentConfig build(std::map<std::string, std::string> s) {
  ExperimentConfig c;
  c.settings = s;
  c.panel = s.at("panel");
  c.output = s.at("output");
  c.forecast_dir = s.at("forecast_dir");
  if (c.output.empty()) bad("output", "", "must not be empty");
  c.seed = static_cast<std::uint64_t>(get_int(s, "seed", 0));

  c.synth.n_assets = get_int(s, "synth.n_assets", 2);
  c.synth.n_months = get_int(s, "synth.n_months", 1);
  c.synth.momentum_coeff = get_double(s, "synth.momentum_coeff");
  c.synth.reversal_coeff = get_double(s, "synth.reversal_coeff");
  c.synth.noise_std = get_double(s, "synth.noise_std");
  c.synth.seed = c.seed;
  try {
    c.synth.start = Month::parse(s.at("synth.start"));
    c.synth.validate();
  } catch (const DataError& e) {
    throw ConfigError(std::string("config synth.*: ") + e.what());
  }

  for (const auto& name : get_list(s, "models")) {
    try {
      c.models.push_back(parse_model_kind(name));
    } catch (const std::exception&) {
      bad("models", name, "unknown model");
    }
  }

  TrainConfig& t = c.train;
  t.learning_rate = get_double(s, "train.learning_rate");
  t.dropout_rate = get_double(s, "train.dropout_rate");
  t.l2_coefficient = get_double(s, "train.l2_coefficient");
  t.batch_size = get_int(s, "train.batch_size", 1);
  t.max_epochs = static_cast<int>(get_int(s, "train.max_epochs", 1));
  t.patience = static_cast<int>(get_int(s, "train.patience", 1));
  const std::string& clip = s.at("train.clip_norm");
  if (clip == "off" || clip == "none") {
    t.clip_norm.reset();
  } else {
    t.clip_norm = get_double(s, "train.clip_norm");
  }
  t.valid_fraction = get_double(s, "train.valid_fraction");
  t.warm_start = get_bool(s, "train.warm_start");
  t.seed = c.seed;
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config train.*: ") + e.what());
  }

  ModelSpec& m = c.model;
  m.hidden_dim = get_int(s, "model.hidden_dim", 1);
  m.num_layers = get_int(s, "model.num_layers", 1);
  m.dnn_layer_dims.clear();
  for (const auto& d : get_list(s, "model.dnn_dims")) {
    const auto v = text::parse_int(d);
    if (!v || *v < 1) bad("model.dnn_dims", s.at("model.dnn_dims"), "expected positive integers");
    m.dnn_layer_dims.push_back(*v);
  }
  const std::string& dnn_input = s.at("model.dnn_input");
  if (dnn_input == "window") {
    m.dnn_input = DnnInput::window;
  } else if (dnn_input == "current") {
    m.dnn_input = DnnInput::current;
  } else {
    bad("model.dnn_input", dnn_input, "expected window or current");
  }
  const std::string& act = s.at("model.dnn_activation");
  if (act == "relu") {
    m.dnn_activation = Activation::relu;
  } else if (act == "tanh") {
    m.dnn_activation = Activation::tanh;
  } else if (act == "sigmoid") {
    m.dnn_activation = Activation::sigmoid;
  } else {
    bad("model.dnn_activation", act, "expected relu, tanh or sigmoid");
  }
  m.transformer.embed_dim = get_int(s, "model.embed_dim", 1);
  m.transformer.ff_dim = get_int(s, "model.ff_dim", 1);
  m.transformer.num_heads = get_int(s, "model.num_heads", 1);
  m.transformer.num_blocks = get_int(s, "model.num_blocks", 1);
  m.transformer.positional_encoding = get_bool(s, "model.positional_encoding");
  for (ModelKind k : kAllModelKinds) {
    try {
      c.spec_for(k).validate();
    } catch (const ShapeError& e) {
      throw ConfigError(std::string("config model.*: ") + e.what());
    }
  }

  c.initial_train_years = static_cast<int>(get_int(s, "schedule.initial_train_years", 1));
  c.refit_every = static_cast<int>(get_int(s, "schedule.refit_every", 1));

  c.portfolio_modes.clear();
  for (const auto& mode : get_list(s, "portfolio.modes")) {
    try {
      c.portfolio_modes.push_back(parse_weight_mode(mode));
    } catch (const std::invalid_argument&) {
      bad("portfolio.modes", mode, "expected equal and/or value");
    }
  }
  return c;
}

}  // namespace

ModelSpec ExperimentConfig::spec_for(ModelKind kind) const {
  ModelSpec s = model;
  s.kind = kind;
  s.input_dim = static_cast<Index>(kNumFeatures);
  s.seq_len = kWindowLength;
  return s;
}

std::string ExperimentConfig::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : settings) {
    if (k == "output" || k == "forecast_dir") continue;
    out += k + "=" + v + "\n";
  }
  return out;
}

std::string ExperimentConfig::hash() const { return text::hex_digest(text::fnv1a(canonical_text())); }

ExperimentConfig parse_config(std::string_view body, const Overrides& overrides) {
  std::map<std::string, std::string> settings = config_keys();
  std::size_t line_no = 0;
  for (auto line : text::split(body, '\n')) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    assign(settings, std::string(line.substr(0, eq)), line.substr(eq + 1),
           "config line " + std::to_string(line_no) + ": ");
  }
  for (const auto& [k, v] : overrides) assign(settings, k, v, "override: ");
  return build(std::move(settings));
}

ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

}  // namespace deepseq
