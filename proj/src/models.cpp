#include "deepseq/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace deepseq {

namespace {

std::string layer_prefix(const std::string& base, Index layer) {
  return base + "l" + std::to_string(layer) + ".";
}

std::string block_prefix(Index block) { return "tf.b" + std::to_string(block) + "."; }

// Gate suffixes in the order their columns are packed for the fused product.
constexpr std::array<const char*, 4> kLstmGates = {"f", "i", "o", "c"};
constexpr std::array<const char*, 3> kGruGates = {"u", "s", "c"};

template <std::size_t N>
void add_gated_layer(std::map<std::string, ParamShape>& shapes, const std::string& prefix,
                     const std::array<const char*, N>& gates, Index in, Index hidden) {
  for (const char* g : gates) {
    shapes[prefix + "W_" + g + "x"] = {in, hidden};
    shapes[prefix + "W_" + g + "h"] = {hidden, hidden};
    shapes[prefix + "b_" + g] = {1, hidden};
  }
}

void add_recurrent_stack(std::map<std::string, ParamShape>& shapes, const ModelSpec& spec,
                         const std::string& base, ModelKind cell) {
  for (Index l = 0; l < spec.num_layers; ++l) {
    const Index in = l == 0 ? spec.input_dim : spec.hidden_dim;
    const std::string prefix = layer_prefix(base, l);
    switch (cell) {
      case ModelKind::rnn:
        shapes[prefix + "W_hx"] = {in, spec.hidden_dim};
        shapes[prefix + "W_hh"] = {spec.hidden_dim, spec.hidden_dim};
        shapes[prefix + "b_h"] = {1, spec.hidden_dim};
        break;
      case ModelKind::gru:
        add_gated_layer(shapes, prefix, kGruGates, in, spec.hidden_dim);
        break;
      default:
        add_gated_layer(shapes, prefix, kLstmGates, in, spec.hidden_dim);
        break;
    }
  }
}

std::string last_component(const std::string& name) {
  const auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(dot + 1);
}

Var apply_activation(Var x, Activation kind) {
  switch (kind) {
    case Activation::identity:
      return x;
    case Activation::tanh:
      return ad::tanh(x);
    case Activation::sigmoid:
      return ad::sigmoid(x);
    case Activation::relu:
      return ad::relu(x);
  }
  throw std::logic_error("unknown activation");
}

// Projects every step of `sequence` (batch x T*in) through `weight` (in x k)
// plus `bias` with a single product. Step t occupies columns [t*k, (t+1)*k).
Var project_steps(Var sequence, Index steps, Var weight, Var bias) {
  const Index batch = sequence.rows();
  if (steps <= 0 || sequence.cols() % steps != 0) {
    throw ShapeError("sequence of width " + std::to_string(sequence.cols()) + " does not split into " +
                     std::to_string(steps) + " steps");
  }
  const Index in = sequence.cols() / steps;
  if (weight.rows() != in) {
    throw ShapeError("step input width " + std::to_string(in) + " does not match weight " +
                     shape_string(weight.value()));
  }
  Var flat = ad::reshape(sequence, batch * steps, in);
  Var proj = ad::add_row(ad::matmul(flat, weight), bias);
  return ad::reshape(proj, batch, steps * weight.cols());
}

Var zeros(Tape& tape, Index rows, Index cols) { return tape.constant(Matrix::Zero(rows, cols)); }

template <std::size_t N>
Var packed(const BoundParams& p, const std::string& prefix, const std::array<const char*, N>& gates,
           const char* kind) {
  std::vector<Var> parts;
  for (const char* g : gates) {
    const std::string k(kind);
    if (k == "b") {
      parts.push_back(p.at(prefix + "b_" + g));
    } else {
      parts.push_back(p.at(prefix + "W_" + g + k));
    }
  }
  return ad::concat_cols(parts);
}

using layers::SequenceOutput;

template <typename LayerFn>
SequenceOutput run_stack(const ModelSpec& spec, const std::string& base, Var inputs, LayerFn layer) {
  Var seq = inputs;
  SequenceOutput out;
  for (Index l = 0; l < spec.num_layers; ++l) {
    out = layer(layer_prefix(base, l), seq);
    if (l + 1 < spec.num_layers) {
      seq = ad::concat_cols(out.hidden);
    }
  }
  return out;
}

SequenceOutput recurrent_stack(const ModelSpec& spec, const BoundParams& p, const std::string& base,
                               ModelKind cell, Var inputs) {
  return run_stack(spec, base, inputs, [&](const std::string& prefix, Var seq) {
    switch (cell) {
      case ModelKind::rnn:
        return layers::rnn_layer(p, prefix, seq, spec.seq_len, spec.hidden_dim);
      case ModelKind::gru:
        return layers::gru_layer(p, prefix, seq, spec.seq_len, spec.hidden_dim);
      default:
        return layers::lstm_layer(p, prefix, seq, spec.seq_len, spec.hidden_dim);
    }
  });
}

Var transformer_body(const ModelSpec& spec, const BoundParams& p, Var inputs, std::vector<Var>* attention) {
  const TransformerSpec& ts = spec.transformer;
  const Index batch = inputs.rows();
  const Index steps = spec.seq_len;
  const Index embed = ts.embed_dim;
  const Index heads = ts.num_heads;
  const Index head_dim = embed / heads;
  Tape& tape = p.tape();

  Var x = ad::reshape(inputs, batch * steps, spec.input_dim);
  x = ad::add_row(ad::matmul(x, p.at("tf.W_in")), p.at("tf.b_in"));
  if (ts.positional_encoding) {
    const Matrix pe = positional_encoding(steps, embed);
    Matrix tiled(batch * steps, embed);
    for (Index b = 0; b < batch; ++b) tiled.middleRows(b * steps, steps) = pe;
    x = ad::add(x, tape.constant(std::move(tiled)));
  }

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (Index blk = 0; blk < ts.num_blocks; ++blk) {
    const std::string pre = block_prefix(blk);
    Var q = ad::add_row(ad::matmul(x, p.at(pre + "W_q")), p.at(pre + "b_q"));
    Var k = ad::matmul(x, p.at(pre + "W_k"));
    Var v = ad::add_row(ad::matmul(x, p.at(pre + "W_v")), p.at(pre + "b_v"));
    Var kt = ad::transpose(k);

    std::vector<Var> samples;
    samples.reserve(static_cast<std::size_t>(batch));
    for (Index b = 0; b < batch; ++b) {
      std::vector<Var> per_head;
      for (Index h = 0; h < heads; ++h) {
        Var qs = ad::slice(q, b * steps, steps, h * head_dim, head_dim);
        Var ks = ad::slice(kt, h * head_dim, head_dim, b * steps, steps);
        Var vs = ad::slice(v, b * steps, steps, h * head_dim, head_dim);
        Var weights = ad::softmax_rows(ad::scale(ad::matmul(qs, ks), inv_sqrt_dk));
        if (attention != nullptr) attention->push_back(weights);
        per_head.push_back(ad::matmul(weights, vs));
      }
      samples.push_back(heads == 1 ? per_head.front() : ad::concat_cols(per_head));
    }
    Var mixed = batch == 1 ? samples.front() : ad::concat_rows(samples);
    mixed = ad::add_row(ad::matmul(mixed, p.at(pre + "W_o")), p.at(pre + "b_o"));

    x = ad::layer_norm_rows(ad::add(x, mixed), ts.layer_norm_eps);
    x = ad::add_row(ad::mul_row(x, p.at(pre + "ln1_gain")), p.at(pre + "ln1_bias"));

    Var ff = ad::relu(ad::add_row(ad::matmul(x, p.at(pre + "W_ff1")), p.at(pre + "b_ff1")));
    ff = ad::add_row(ad::matmul(ff, p.at(pre + "W_ff2")), p.at(pre + "b_ff2"));
    x = ad::layer_norm_rows(ad::add(x, ff), ts.layer_norm_eps);
    x = ad::add_row(ad::mul_row(x, p.at(pre + "ln2_gain")), p.at(pre + "ln2_bias"));
  }

  // Mean over time steps.
  Var per_sample = ad::reshape(x, batch, steps * embed);
  Var pooled = ad::slice_cols(per_sample, 0, embed);
  for (Index t = 1; t < steps; ++t) {
    pooled = ad::add(pooled, ad::slice_cols(per_sample, t * embed, embed));
  }
  return ad::scale(pooled, 1.0 / static_cast<double>(steps));
}

Var encode_clean(const ModelSpec& spec, const BoundParams& p, Var inputs) {
  switch (spec.kind) {
    case ModelKind::dnn: {
      if (inputs.cols() != spec.seq_len * spec.input_dim) {
        throw ShapeError("dnn: expected " + std::to_string(spec.seq_len * spec.input_dim) +
                         " window columns, got " + std::to_string(inputs.cols()));
      }
      Var h = spec.dnn_input == DnnInput::window
                  ? inputs
                  : ad::slice_cols(inputs, (spec.seq_len - 1) * spec.input_dim, spec.input_dim);
      for (std::size_t l = 0; l < spec.dnn_layer_dims.size(); ++l) {
        const std::string pre = "dnn.l" + std::to_string(l) + ".";
        h = apply_activation(ad::add_row(ad::matmul(h, p.at(pre + "W")), p.at(pre + "b")), spec.dnn_activation);
      }
      return h;
    }
    case ModelKind::rnn:
      return recurrent_stack(spec, p, "rnn.", ModelKind::rnn, inputs).hidden.back();
    case ModelKind::lstm:
      return recurrent_stack(spec, p, "lstm.", ModelKind::lstm, inputs).hidden.back();
    case ModelKind::gru:
      return recurrent_stack(spec, p, "gru.", ModelKind::gru, inputs).hidden.back();
    case ModelKind::bilstm: {
      Var fwd = recurrent_stack(spec, p, "bilstm.fwd.", ModelKind::lstm, inputs).hidden.back();
      Var reversed = layers::reverse_steps(inputs, spec.seq_len);
      Var bwd = recurrent_stack(spec, p, "bilstm.bwd.", ModelKind::lstm, reversed).hidden.back();
      return ad::concat_cols({fwd, bwd});
    }
    case ModelKind::lstm_att: {
      SequenceOutput top = recurrent_stack(spec, p, "lstm.", ModelKind::lstm, inputs);
      return layers::additive_attention(p, "att.", top.hidden).z;
    }
    case ModelKind::transformer:
      return transformer_body(spec, p, inputs, nullptr);
  }
  throw std::logic_error("encode: unknown model kind");
}

void require_window_width(const ModelSpec& spec, const Matrix& inputs) {
  if (inputs.cols() != spec.seq_len * spec.input_dim) {
    throw ShapeError(std::string(to_string(spec.kind)) + ": input width " + std::to_string(inputs.cols()) +
                     " != seq_len * input_dim = " + std::to_string(spec.seq_len * spec.input_dim));
  }
}

Matrix represent_as(ModelKind kind, const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch) {
  ModelSpec s = spec;
  s.kind = kind;
  return represent(s, params, batch);
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::dnn:
      return "DNN";
    case ModelKind::rnn:
      return "RNN";
    case ModelKind::lstm:
      return "LSTM";
    case ModelKind::gru:
      return "GRU";
    case ModelKind::bilstm:
      return "BiLSTM";
    case ModelKind::lstm_att:
      return "LSTM_ATT";
    case ModelKind::transformer:
      return "Transformer";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  auto canon = [](std::string_view s) {
    std::string out;
    for (char ch : s) {
      if (ch == '-' || ch == '_') continue;
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    return out;
  };
  const std::string wanted = canon(name);
  for (ModelKind k : kAllModelKinds) {
    if (canon(to_string(k)) == wanted) return k;
  }
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

bool is_recurrent(ModelKind kind) {
  return kind != ModelKind::dnn && kind != ModelKind::transformer;
}

void ModelSpec::validate() const {
  const std::string who(to_string(kind));
  if (input_dim < 1 || seq_len < 1) {
    throw ShapeError(who + ": input_dim and seq_len must be positive");
  }
  if (is_recurrent(kind) && (hidden_dim < 1 || num_layers < 1)) {
    throw ShapeError(who + ": hidden_dim and num_layers must be positive");
  }
  if (kind == ModelKind::dnn) {
    if (dnn_layer_dims.size() != 3) {
      throw ShapeError("DNN: exactly three hidden layers required, got " + std::to_string(dnn_layer_dims.size()));
    }
    for (Index d : dnn_layer_dims) {
      if (d < 1) throw ShapeError("DNN: layer widths must be positive");
    }
  }
  if (kind == ModelKind::transformer) {
    const TransformerSpec& t = transformer;
    if (t.embed_dim < 1 || t.ff_dim < 1 || t.num_heads < 1 || t.num_blocks < 1) {
      throw ShapeError("Transformer: dimensions must be positive");
    }
    if (t.embed_dim % t.num_heads != 0) {
      throw ShapeError("Transformer: embed_dim " + std::to_string(t.embed_dim) + " not divisible by num_heads " +
                       std::to_string(t.num_heads));
    }
  }
}

Index ModelSpec::representation_dim() const {
  switch (kind) {
    case ModelKind::dnn:
      return dnn_layer_dims.empty() ? 0 : dnn_layer_dims.back();
    case ModelKind::bilstm:
      return 2 * hidden_dim;
    case ModelKind::transformer:
      return transformer.embed_dim;
    default:
      return hidden_dim;
  }
}

Index ModelSpec::dnn_input_dim() const {
  return dnn_input == DnnInput::window ? seq_len * input_dim : input_dim;
}

Matrix SequenceBatch::step(Index t) const {
  if (t < 0 || t >= seq_len) {
    throw ShapeError("step " + std::to_string(t) + " outside window of " + std::to_string(seq_len));
  }
  return inputs.middleCols(t * input_dim, input_dim);
}

void SequenceBatch::validate() const {
  if (inputs.cols() != seq_len * input_dim) {
    throw ShapeError("SequenceBatch: inputs " + shape_string(inputs) + " do not hold " + std::to_string(seq_len) +
                     " steps of " + std::to_string(input_dim) + " features");
  }
  if (targets.size() != 0 && targets.size() != inputs.rows()) {
    throw ShapeError("SequenceBatch: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(inputs.rows()) + " samples");
  }
  if (!all_finite(inputs) || !all_finite(targets)) {
    throw NumericError("SequenceBatch: non-finite feature or target");
  }
}

std::map<std::string, ParamShape> param_shapes(const ModelSpec& spec) {
  spec.validate();
  std::map<std::string, ParamShape> shapes;
  switch (spec.kind) {
    case ModelKind::dnn: {
      Index in = spec.dnn_input_dim();
      for (std::size_t l = 0; l < spec.dnn_layer_dims.size(); ++l) {
        const std::string pre = "dnn.l" + std::to_string(l) + ".";
        shapes[pre + "W"] = {in, spec.dnn_layer_dims[l]};
        shapes[pre + "b"] = {1, spec.dnn_layer_dims[l]};
        in = spec.dnn_layer_dims[l];
      }
      break;
    }
    case ModelKind::rnn:
      add_recurrent_stack(shapes, spec, "rnn.", ModelKind::rnn);
      break;
    case ModelKind::lstm:
      add_recurrent_stack(shapes, spec, "lstm.", ModelKind::lstm);
      break;
    case ModelKind::gru:
      add_recurrent_stack(shapes, spec, "gru.", ModelKind::gru);
      break;
    case ModelKind::bilstm:
      add_recurrent_stack(shapes, spec, "bilstm.fwd.", ModelKind::lstm);
      add_recurrent_stack(shapes, spec, "bilstm.bwd.", ModelKind::lstm);
      break;
    case ModelKind::lstm_att:
      add_recurrent_stack(shapes, spec, "lstm.", ModelKind::lstm);
      shapes["att.W1"] = {spec.hidden_dim, spec.hidden_dim};
      shapes["att.W2"] = {spec.hidden_dim, spec.hidden_dim};
      shapes["att.v"] = {spec.hidden_dim, 1};
      break;
    case ModelKind::transformer: {
      const TransformerSpec& t = spec.transformer;
      shapes["tf.W_in"] = {spec.input_dim, t.embed_dim};
      shapes["tf.b_in"] = {1, t.embed_dim};
      for (Index blk = 0; blk < t.num_blocks; ++blk) {
        const std::string pre = block_prefix(blk);
        for (const char* m : {"q", "k", "v", "o"}) {
          shapes[pre + "W_" + m] = {t.embed_dim, t.embed_dim};
        }
        // No key bias: it shifts a whole score row and cancels in the softmax.
        for (const char* m : {"q", "v", "o"}) {
          shapes[pre + "b_" + m] = {1, t.embed_dim};
        }
        shapes[pre + "W_ff1"] = {t.embed_dim, t.ff_dim};
        shapes[pre + "b_ff1"] = {1, t.ff_dim};
        shapes[pre + "W_ff2"] = {t.ff_dim, t.embed_dim};
        shapes[pre + "b_ff2"] = {1, t.embed_dim};
        for (const char* ln : {"ln1", "ln2"}) {
          shapes[pre + ln + "_gain"] = {1, t.embed_dim};
          shapes[pre + ln + "_bias"] = {1, t.embed_dim};
        }
      }
      break;
    }
  }
  shapes["head.w"] = {spec.representation_dim(), 1};
  shapes["head.b"] = {1, 1};
  return shapes;
}

Index param_count(const ModelSpec& spec) {
  Index n = 0;
  for (const auto& [name, s] : param_shapes(spec)) n += s.rows * s.cols;
  return n;
}

ParamSet init_params(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamSet params;
  for (const auto& [name, s] : param_shapes(spec)) {
    const std::string leaf = last_component(name);
    Matrix m;
    if (leaf.ends_with("_gain")) {
      m = Matrix::Ones(s.rows, s.cols);
    } else if (leaf.starts_with("b") || leaf.ends_with("_bias")) {
      m = Matrix::Zero(s.rows, s.cols);
      if (leaf == "b_f" && name.find("lstm") != std::string::npos) m.setConstant(1.0);
    } else {
      const double limit = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
      std::uniform_real_distribution<double> dist(-limit, limit);
      m.resize(s.rows, s.cols);
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    }
    params.set(name, std::move(m));
  }
  return params;
}

void check_params(const ModelSpec& spec, const ParamSet& params) {
  const auto shapes = param_shapes(spec);
  for (const auto& [name, s] : shapes) {
    if (!params.contains(name)) {
      throw ShapeError(std::string(to_string(spec.kind)) + ": missing parameter '" + name + "'");
    }
    const Matrix& m = params.at(name);
    if (m.rows() != s.rows || m.cols() != s.cols) {
      throw ShapeError(std::string(to_string(spec.kind)) + ": parameter '" + name + "' is " + shape_string(m) +
                       ", expected " + shape_string(s.rows, s.cols));
    }
  }
  for (const auto& [name, m] : params) {
    if (!shapes.contains(name)) {
      throw ShapeError(std::string(to_string(spec.kind)) + ": unexpected parameter '" + name + "'");
    }
  }
}

BoundParams::BoundParams(Tape& tape, const ParamSet& params) : tape_(&tape) {
  for (const auto& [name, m] : params) {
    vars_.emplace(name, tape.parameter(name, m));
  }
}

Var BoundParams::at(std::string_view name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) {
    throw ShapeError("parameter '" + std::string(name) + "' is not bound");
  }
  return it->second;
}

namespace layers {

SequenceOutput rnn_layer(const BoundParams& p, const std::string& prefix, Var sequence, Index steps,
                         Index hidden_dim) {
  Var px = project_steps(sequence, steps, p.at(prefix + "W_hx"), p.at(prefix + "b_h"));
  Var w_hh = p.at(prefix + "W_hh");
  Var h = zeros(p.tape(), sequence.rows(), hidden_dim);
  SequenceOutput out;
  for (Index t = 0; t < steps; ++t) {
    h = ad::tanh(ad::add(ad::slice_cols(px, t * hidden_dim, hidden_dim), ad::matmul(h, w_hh)));
    out.hidden.push_back(h);
  }
  return out;
}

SequenceOutput lstm_layer(const BoundParams& p, const std::string& prefix, Var sequence, Index steps,
                          Index hidden_dim, std::optional<InitialState> init) {
  const Index H = hidden_dim;
  Var px = project_steps(sequence, steps, packed(p, prefix, kLstmGates, "x"), packed(p, prefix, kLstmGates, "b"));
  Var w_h = packed(p, prefix, kLstmGates, "h");
  Var h = init ? init->h : zeros(p.tape(), sequence.rows(), H);
  Var c = init ? init->c : zeros(p.tape(), sequence.rows(), H);
  SequenceOutput out;
  for (Index t = 0; t < steps; ++t) {
    Var pre = ad::add(ad::slice_cols(px, t * 4 * H, 4 * H), ad::matmul(h, w_h));
    Var gates = ad::sigmoid(ad::slice_cols(pre, 0, 3 * H));
    Var f = ad::slice_cols(gates, 0, H);
    Var i = ad::slice_cols(gates, H, H);
    Var o = ad::slice_cols(gates, 2 * H, H);
    Var candidate = ad::tanh(ad::slice_cols(pre, 3 * H, H));
    c = ad::add(ad::mul(f, c), ad::mul(i, candidate));
    h = ad::mul(o, ad::tanh(c));
    out.hidden.push_back(h);
    out.cell.push_back(c);
  }
  return out;
}

SequenceOutput gru_layer(const BoundParams& p, const std::string& prefix, Var sequence, Index steps,
                         Index hidden_dim) {
  const Index H = hidden_dim;
  Var px = project_steps(sequence, steps, packed(p, prefix, kGruGates, "x"), packed(p, prefix, kGruGates, "b"));
  Var w_gates = ad::concat_cols({p.at(prefix + "W_uh"), p.at(prefix + "W_sh")});
  Var w_ch = p.at(prefix + "W_ch");
  Var h = zeros(p.tape(), sequence.rows(), H);
  SequenceOutput out;
  for (Index t = 0; t < steps; ++t) {
    Var step = ad::slice_cols(px, t * 3 * H, 3 * H);
    Var gates = ad::sigmoid(ad::add(ad::slice_cols(step, 0, 2 * H), ad::matmul(h, w_gates)));
    Var u = ad::slice_cols(gates, 0, H);
    Var s = ad::slice_cols(gates, H, H);
    Var candidate = ad::tanh(ad::add(ad::slice_cols(step, 2 * H, H), ad::matmul(ad::mul(s, h), w_ch)));
    // u*h + (1-u)*candidate, written without a ones constant.
    h = ad::add(candidate, ad::mul(u, ad::sub(h, candidate)));
    out.hidden.push_back(h);
  }
  return out;
}

AttentionOutput additive_attention(const BoundParams& p, const std::string& prefix,
                                   const std::vector<Var>& hidden) {
  if (hidden.empty()) {
    throw ShapeError("additive_attention: empty hidden-state sequence");
  }
  Var w1 = p.at(prefix + "W1");
  Var v = p.at(prefix + "v");
  Var query = ad::matmul(hidden.back(), p.at(prefix + "W2"));
  std::vector<Var> scores;
  scores.reserve(hidden.size());
  for (Var h : hidden) {
    scores.push_back(ad::matmul(ad::tanh(ad::add(ad::matmul(h, w1), query)), v));
  }
  Var alpha = ad::softmax_rows(scores.size() == 1 ? scores.front() : ad::concat_cols(scores));
  Var z = ad::mul_col(hidden.front(), ad::slice_cols(alpha, 0, 1));
  for (std::size_t t = 1; t < hidden.size(); ++t) {
    z = ad::add(z, ad::mul_col(hidden[t], ad::slice_cols(alpha, static_cast<Index>(t), 1)));
  }
  return {z, alpha};
}

Var reverse_steps(Var sequence, Index steps) {
  const Index width = sequence.cols() / steps;
  std::vector<Var> parts;
  parts.reserve(static_cast<std::size_t>(steps));
  for (Index t = steps; t-- > 0;) {
    parts.push_back(ad::slice_cols(sequence, t * width, width));
  }
  return steps == 1 ? parts.front() : ad::concat_cols(parts);
}

}  // namespace layers

Var encode(const ModelSpec& spec, const BoundParams& p, Var inputs, const ForwardMode& mode) {
  spec.validate();
  require_window_width(spec, inputs.value());
  Var z = encode_clean(spec, p, inputs);
  if (!mode.stochastic()) {
    return z;
  }
  if (mode.rng == nullptr) {
    throw std::invalid_argument("encode: dropout requires an RNG");
  }
  if (mode.dropout_rate >= 1.0) {
    throw std::invalid_argument("encode: dropout rate must be below 1");
  }
  // Inverted dropout: kept units are scaled by 1/keep so inference is a no-op.
  const double keep = 1.0 - mode.dropout_rate;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix mask(z.rows(), z.cols());
  for (Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = unit(*mode.rng) < keep ? 1.0 / keep : 0.0;
  }
  return ad::mul(z, p.tape().constant(std::move(mask)));
}

Var forecast_head(const BoundParams& p, Var z) {
  Var w = p.at("head.w");
  if (w.rows() != z.cols()) {
    throw ShapeError("forecast_head: z width " + std::to_string(z.cols()) + " vs head weight " +
                     shape_string(w.value()));
  }
  return ad::add_row(ad::matmul(z, w), p.at("head.b"));
}

Var predict(const ModelSpec& spec, const BoundParams& p, Var inputs, const ForwardMode& mode) {
  return forecast_head(p, encode(spec, p, inputs, mode));
}

Vector predict_values(const ModelSpec& spec, const ParamSet& params, const Matrix& inputs, Index chunk) {
  check_params(spec, params);
  require_window_width(spec, inputs);
  Vector out(inputs.rows());
  chunk = std::max<Index>(chunk, 1);
  for (Index start = 0; start < inputs.rows(); start += chunk) {
    const Index n = std::min(chunk, inputs.rows() - start);
    Tape tape;
    BoundParams p(tape, params);
    Var x = tape.constant(inputs.middleRows(start, n));
    out.segment(start, n) = predict(spec, p, x).value().col(0);
  }
  return out;
}

Matrix represent(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch) {
  check_params(spec, params);
  batch.validate();
  if (batch.seq_len != spec.seq_len || batch.input_dim != spec.input_dim) {
    throw ShapeError("batch window " + shape_string(batch.seq_len, batch.input_dim) + " does not match spec " +
                     shape_string(spec.seq_len, spec.input_dim));
  }
  Tape tape;
  BoundParams p(tape, params);
  return encode(spec, p, tape.constant(batch.inputs)).value();
}

Matrix rnn_forward(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch) {
  return represent_as(ModelKind::rnn, spec, params, batch);
}

Matrix lstm_forward(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch) {
  return represent_as(ModelKind::lstm, spec, params, batch);
}

Matrix gru_forward(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch) {
  return represent_as(ModelKind::gru, spec, params, batch);
}

Matrix bilstm_forward(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch) {
  return represent_as(ModelKind::bilstm, spec, params, batch);
}

Matrix lstm_att_forward(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch) {
  return represent_as(ModelKind::lstm_att, spec, params, batch);
}

Matrix transformer_encode(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch) {
  return represent_as(ModelKind::transformer, spec, params, batch);
}

Matrix dnn_forward(const ModelSpec& spec, const ParamSet& params, const Matrix& flat_input) {
  ModelSpec s = spec;
  s.kind = ModelKind::dnn;
  check_params(s, params);
  if (flat_input.cols() != s.dnn_input_dim()) {
    throw ShapeError("dnn_forward: input width " + std::to_string(flat_input.cols()) + " != " +
                     std::to_string(s.dnn_input_dim()));
  }
  // Re-embed a current-month-only input into a full window so encode sees
  // the usual layout.
  Matrix window = flat_input;
  if (s.dnn_input == DnnInput::current) {
    window = Matrix::Zero(flat_input.rows(), s.seq_len * s.input_dim);
    window.rightCols(s.input_dim) = flat_input;
  }
  Tape tape;
  BoundParams p(tape, params);
  return encode(s, p, tape.constant(std::move(window))).value();
}

AttentionResult additive_attention(const Matrix& hidden_states, const ParamSet& att, const std::string& prefix) {
  if (hidden_states.rows() == 0) {
    throw ShapeError("additive_attention: empty hidden-state sequence");
  }
  Tape tape;
  ParamSet own;
  for (const char* n : {"W1", "W2", "v"}) own.set(prefix + n, att.at(prefix + n));
  BoundParams p(tape, own);
  std::vector<Var> hidden;
  for (Index t = 0; t < hidden_states.rows(); ++t) {
    hidden.push_back(tape.constant(hidden_states.row(t)));
  }
  const auto out = layers::additive_attention(p, prefix, hidden);
  return {out.z.value().row(0).transpose(), out.alpha.value().row(0).transpose()};
}

Vector forecast_head(const Matrix& z, const Matrix& w, double b) {
  if (w.cols() != 1 || w.rows() != z.cols()) {
    throw ShapeError("forecast_head: z " + shape_string(z) + " incompatible with weight " + shape_string(w));
  }
  Vector out = (z * w).col(0);
  out.array() += b;
  return out;
}

std::vector<Matrix> transformer_attention_weights(const ModelSpec& spec, const ParamSet& params,
                                                  const SequenceBatch& batch) {
  ModelSpec s = spec;
  s.kind = ModelKind::transformer;
  check_params(s, params);
  batch.validate();
  Tape tape;
  BoundParams p(tape, params);
  std::vector<Var> attention;
  transformer_body(s, p, tape.constant(batch.inputs), &attention);
  std::vector<Matrix> out;
  out.reserve(attention.size());
  for (Var a : attention) out.push_back(a.value());
  return out;
}

Matrix positional_encoding(Index steps, Index embed_dim) {
  Matrix pe(steps, embed_dim);
  for (Index t = 0; t < steps; ++t) {
    for (Index i = 0; i < embed_dim; ++i) {
      const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(embed_dim);
      const double angle = static_cast<double>(t) / std::pow(10000.0, exponent);
      pe(t, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

}  // namespace deepseq
