#ifndef DEEPSEQ_MODELS_HPP
#define DEEPSEQ_MODELS_HPP

#include "deepseq/autograd.hpp"
#include "deepseq/params.hpp"
#include "deepseq/tensor.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace deepseq {

enum class ModelKind { dnn, rnn, lstm, gru, bilstm, lstm_att, transformer };

inline constexpr std::array<ModelKind, 7> kAllModelKinds = {
    ModelKind::dnn,    ModelKind::rnn,      ModelKind::lstm,        ModelKind::gru,
    ModelKind::bilstm, ModelKind::lstm_att, ModelKind::transformer,
};

std::string_view to_string(ModelKind kind);
/// Accepts the canonical names (DNN, RNN, LSTM, GRU, BiLSTM, LSTM_ATT,
/// Transformer) case-insensitively, with '-' and '_' interchangeable.
ModelKind parse_model_kind(std::string_view name);
bool is_recurrent(ModelKind kind);

enum class DnnInput { window, current };

struct TransformerSpec {
  Index embed_dim = 256;
  Index ff_dim = 64;
  Index num_heads = 4;
  Index num_blocks = 1;
  bool positional_encoding = true;
  double layer_norm_eps = 1e-5;

  friend bool operator==(const TransformerSpec&, const TransformerSpec&) = default;
};

struct ModelSpec {
  ModelKind kind = ModelKind::lstm;
  Index input_dim = 51;
  Index seq_len = 12;
  Index hidden_dim = 32;
  Index num_layers = 2;
  std::vector<Index> dnn_layer_dims{256, 64, 8};
  Activation dnn_activation = Activation::tanh;
  DnnInput dnn_input = DnnInput::window;
  TransformerSpec transformer;

  /// Throws ShapeError on an inconsistent architecture.
  void validate() const;
  /// Width of the sequence representation z fed to the forecast head.
  Index representation_dim() const;
  /// Width of the DNN input layer.
  Index dnn_input_dim() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// One mini-batch of feature windows. Row b of `inputs` holds the window of
/// sample b flattened step-major, oldest step first:
/// [x_1(0..D-1), x_2(0..D-1), ..., x_T(0..D-1)].
struct SequenceBatch {
  Matrix inputs;
  Vector targets;
  Index seq_len = 0;
  Index input_dim = 0;

  Index size() const { return inputs.rows(); }
  /// Features of step t (0-based, oldest first) for every sample: batch x D.
  Matrix step(Index t) const;
  void validate() const;
};

struct ParamShape {
  Index rows = 0;
  Index cols = 0;
};

/// Every parameter the architecture owns, including the forecast head.
std::map<std::string, ParamShape> param_shapes(const ModelSpec& spec);
Index param_count(const ModelSpec& spec);

/// Glorot-uniform weights, zero biases, unit layer-norm gains and forget-gate
/// biases of 1.0.
ParamSet init_params(const ModelSpec& spec, std::uint64_t seed);

/// Rejects missing, extra or mis-shaped parameters with a ShapeError.
void check_params(const ModelSpec& spec, const ParamSet& params);

/// Parameters registered on a tape, looked up by name.
class BoundParams {
 public:
  BoundParams() = default;
  BoundParams(Tape& tape, const ParamSet& params);

  Var at(std::string_view name) const;
  Tape& tape() const { return *tape_; }

 private:
  Tape* tape_ = nullptr;
  std::map<std::string, Var, std::less<>> vars_;
};

struct ForwardMode {
  bool training = false;
  double dropout_rate = 0.0;
  std::mt19937_64* rng = nullptr;

  bool stochastic() const { return training && dropout_rate > 0.0; }
};

namespace layers {

struct SequenceOutput {
  std::vector<Var> hidden;  // h_1 .. h_T, each batch x H
  std::vector<Var> cell;    // LSTM only: c_1 .. c_T
};

struct InitialState {
  Var h;
  Var c;
};

/// h_t = tanh(x_t W_hx + h_{t-1} W_hh + b_h). `sequence` is batch x (T * in).
SequenceOutput rnn_layer(const BoundParams& p, const std::string& prefix, Var sequence, Index steps,
                         Index hidden_dim);

/// Stored weights are input-major (in x H), so x_t W equals the column-vector
/// form W^T x_t.
SequenceOutput lstm_layer(const BoundParams& p, const std::string& prefix, Var sequence, Index steps,
                          Index hidden_dim, std::optional<InitialState> init = std::nullopt);

/// Update gate u keeps the previous state: h_t = u * h_{t-1} + (1 - u) * h~_t.
SequenceOutput gru_layer(const BoundParams& p, const std::string& prefix, Var sequence, Index steps,
                         Index hidden_dim);

struct AttentionOutput {
  Var z;      // batch x H
  Var alpha;  // batch x T
};

/// e_t = tanh(h_t W1 + h_T W2) v, alpha = softmax(e), z = sum_t alpha_t h_t.
AttentionOutput additive_attention(const BoundParams& p, const std::string& prefix,
                                   const std::vector<Var>& hidden);

/// Reverses the step order of a batch x (T * width) sequence.
Var reverse_steps(Var sequence, Index steps);

}  // namespace layers

/// Sequence representation z (batch x representation_dim). Dropout on z is
/// applied only when `mode.stochastic()`.
Var encode(const ModelSpec& spec, const BoundParams& p, Var inputs, const ForwardMode& mode = {});

/// Linear forecast head r_hat = z w + b, batch x 1.
Var forecast_head(const BoundParams& p, Var z);

/// encode + forecast_head.
Var predict(const ModelSpec& spec, const BoundParams& p, Var inputs, const ForwardMode& mode = {});

/// Inference without dropout. Returns one forecast per input row; large inputs
/// are processed in chunks of `chunk` rows.
Vector predict_values(const ModelSpec& spec, const ParamSet& params, const Matrix& inputs,
                      Index chunk = 512);

/// Value-level sequence representation for any kind.
Matrix represent(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch);

Matrix rnn_forward(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch);
Matrix lstm_forward(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch);
Matrix gru_forward(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch);
Matrix bilstm_forward(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch);
Matrix lstm_att_forward(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch);
Matrix transformer_encode(const ModelSpec& spec, const ParamSet& params, const SequenceBatch& batch);
/// `flat_input` is batch x dnn_input_dim().
Matrix dnn_forward(const ModelSpec& spec, const ParamSet& params, const Matrix& flat_input);

struct AttentionResult {
  Vector z;
  Vector alpha;
};

/// Single-sample additive attention over `hidden_states` (T x H) with the
/// last row as query. `att` must hold W1 (H x H), W2 (H x H) and v (H x 1)
/// under the given prefix.
AttentionResult additive_attention(const Matrix& hidden_states, const ParamSet& att,
                                   const std::string& prefix = "att");

/// r_hat = z w + b for every row of z.
Vector forecast_head(const Matrix& z, const Matrix& w, double b);

/// Self-attention weights of every block, sample and head (T x T each,
/// ordered block-major, then sample, then head).
std::vector<Matrix> transformer_attention_weights(const ModelSpec& spec, const ParamSet& params,
                                                  const SequenceBatch& batch);

/// Sinusoidal encoding: PE(t, 2i) = sin(t / 10000^(2i/E)), PE(t, 2i+1) = cos(...).
Matrix positional_encoding(Index steps, Index embed_dim);

}  // namespace deepseq

#endif  // DEEPSEQ_MODELS_HPP
