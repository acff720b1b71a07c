#ifndef DEEPSEQ_AUTOGRAD_HPP
#define DEEPSEQ_AUTOGRAD_HPP

#include "deepseq/params.hpp"
#include "deepseq/tensor.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace deepseq {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// tape is alive.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
};

enum class Op {
  constant,
  parameter,
  matmul,
  add,
  sub,
  mul,
  add_row,
  mul_row,
  mul_col,
  scale,
  tanh,
  sigmoid,
  relu,
  softmax_rows,
  concat_cols,
  concat_rows,
  slice,
  reshape,
  transpose,
  sum,
  mean,
  square,
  layer_norm_rows,
};

/// Per-node adjoints from one backward sweep. Nodes the loss does not depend
/// on report a zero matrix of their own shape.
class NodeGradients {
 public:
  NodeGradients(const Tape& tape, std::vector<Matrix> grads);

  Matrix of(Var v) const;

 private:
  const Tape* tape_;
  std::vector<Matrix> grads_;
};

/// Reverse-mode record of matrix operations. Nodes are appended in evaluation
/// order, so node ids are already a topological order.
class Tape {
 public:
  struct Node {
    Op op = Op::constant;
    std::vector<std::size_t> inputs;
    Matrix value;
    Matrix cache;  // per-op forward cache (layer norm: 1/sigma per row)
    double scalar = 0.0;
    Index row0 = 0;
    Index col0 = 0;
    std::string name;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Registers a trainable leaf. Names must be unique per tape.
  Var parameter(std::string name, Matrix value);

  Var record(Op op, std::vector<std::size_t> inputs, Matrix value);
  Var record(Node node);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  /// Adjoint of every node with respect to a 1x1 loss node.
  NodeGradients gradients(Var loss) const;

  /// d(loss)/d(param) for every registered parameter. Throws NumericError
  /// naming the first parameter whose gradient is not finite.
  GradientSet backward(Var loss) const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::size_t> params_;
};

namespace ad {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a (n x m) plus a 1 x m row broadcast down every row.
Var add_row(Var a, Var row);
/// a (n x m) times a 1 x m row, elementwise per row.
Var mul_row(Var a, Var row);
/// a (n x m) times an n x 1 column, elementwise per column.
Var mul_col(Var a, Var col);
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var softmax_rows(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice(Var a, Index row0, Index rows, Index col0, Index cols);
Var slice_cols(Var a, Index col0, Index cols);
/// Row-major reinterpretation; rows * cols must equal the input size.
Var reshape(Var a, Index rows, Index cols);
Var transpose(Var a);
Var sum(Var a);
Var mean(Var a);
Var square(Var a);
/// Per-row standardization (x - mean) / sqrt(var + eps), population variance.
Var layer_norm_rows(Var a, double eps);

}  // namespace ad

}  // namespace deepseq

#endif  // DEEPSEQ_AUTOGRAD_HPP
