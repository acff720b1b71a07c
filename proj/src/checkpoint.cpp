#include "deepseq/checkpoint.hpp"

#include "deepseq/data.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace deepseq {

using nlohmann::ordered_json;

namespace {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::identity:
      return "identity";
    case Activation::tanh:
      return "tanh";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::relu:
      return "relu";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  for (Activation a : {Activation::identity, Activation::tanh, Activation::sigmoid, Activation::relu}) {
    if (activation_name(a) == s) return a;
  }
  throw ShapeError("checkpoint: unknown activation '" + s + "'");
}

ordered_json spec_json(const ModelSpec& spec) {
  ordered_json j;
  j["kind"] = std::string(to_string(spec.kind));
  j["input_dim"] = spec.input_dim;
  j["seq_len"] = spec.seq_len;
  j["hidden_dim"] = spec.hidden_dim;
  j["num_layers"] = spec.num_layers;
  j["dnn_layer_dims"] = spec.dnn_layer_dims;
  j["dnn_activation"] = std::string(activation_name(spec.dnn_activation));
  j["dnn_input"] = spec.dnn_input == DnnInput::window ? "window" : "current";
  ordered_json tf;
  tf["embed_dim"] = spec.transformer.embed_dim;
  tf["ff_dim"] = spec.transformer.ff_dim;
  tf["num_heads"] = spec.transformer.num_heads;
  tf["num_blocks"] = spec.transformer.num_blocks;
  tf["positional_encoding"] = spec.transformer.positional_encoding;
  tf["layer_norm_eps"] = spec.transformer.layer_norm_eps;
  j["transformer"] = tf;
  return j;
}

ModelSpec spec_from(const ordered_json& j) {
  ModelSpec s;
  s.kind = parse_model_kind(j.at("kind").get<std::string>());
  s.input_dim = j.at("input_dim").get<Index>();
  s.seq_len = j.at("seq_len").get<Index>();
  s.hidden_dim = j.at("hidden_dim").get<Index>();
  s.num_layers = j.at("num_layers").get<Index>();
  s.dnn_layer_dims = j.at("dnn_layer_dims").get<std::vector<Index>>();
  s.dnn_activation = parse_activation(j.at("dnn_activation").get<std::string>());
  const auto mode = j.at("dnn_input").get<std::string>();
  if (mode != "window" && mode != "current") throw ShapeError("checkpoint: unknown dnn_input '" + mode + "'");
  s.dnn_input = mode == "window" ? DnnInput::window : DnnInput::current;
  const auto& tf = j.at("transformer");
  s.transformer.embed_dim = tf.at("embed_dim").get<Index>();
  s.transformer.ff_dim = tf.at("ff_dim").get<Index>();
  s.transformer.num_heads = tf.at("num_heads").get<Index>();
  s.transformer.num_blocks = tf.at("num_blocks").get<Index>();
  s.transformer.positional_encoding = tf.at("positional_encoding").get<bool>();
  s.transformer.layer_norm_eps = tf.at("layer_norm_eps").get<double>();
  s.validate();
  return s;
}

}  // namespace

std::string spec_to_json(const ModelSpec& spec) { return spec_json(spec).dump(); }

std::string checkpoint_to_json(const Checkpoint& c) {
  ordered_json j;
  j["format"] = "deepseq-checkpoint-1";
  j["refit_year"] = c.refit_year;
  j["config_hash"] = c.config_hash;
  j["spec"] = spec_json(c.spec);
  ordered_json params = ordered_json::object();
  for (const auto& [name, m] : c.params) {
    ordered_json e;
    e["rows"] = m.rows();
    e["cols"] = m.cols();
    e["data"] = std::vector<double>(m.data(), m.data() + m.size());
    params[name] = std::move(e);
  }
  j["params"] = std::move(params);
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const ordered_json j = ordered_json::parse(text);
    if (j.at("format").get<std::string>() != "deepseq-checkpoint-1") {
      throw ShapeError("checkpoint: unsupported format");
    }
    Checkpoint c;
    c.refit_year = j.at("refit_year").get<int>();
    c.config_hash = j.at("config_hash").get<std::string>();
    c.spec = spec_from(j.at("spec"));
    for (const auto& [name, e] : j.at("params").items()) {
      const Index rows = e.at("rows").get<Index>();
      const Index cols = e.at("cols").get<Index>();
      const auto data = e.at("data").get<std::vector<double>>();
      if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols) {
        throw ShapeError("checkpoint: parameter '" + name + "' has inconsistent size");
      }
      Matrix m(rows, cols);
      std::copy(data.begin(), data.end(), m.data());
      c.params.set(name, std::move(m));
    }
    check_params(c.spec, c.params);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ShapeError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(c);
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return checkpoint_from_json(ss.str());
  } catch (const ShapeError& e) {
    throw ShapeError(path.string() + ": " + e.what());
  }
}

}  // namespace deepseq
