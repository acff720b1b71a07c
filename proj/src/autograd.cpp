#include "deepseq/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace deepseq {

const Matrix& Var::value() const {
  if (tape == nullptr) {
    throw std::logic_error("Var: not bound to a tape");
  }
  return tape->value(*this);
}

NodeGradients::NodeGradients(const Tape& tape, std::vector<Matrix> grads)
    : tape_(&tape), grads_(std::move(grads)) {}

Matrix NodeGradients::of(Var v) const {
  const Matrix& g = grads_.at(v.id);
  if (g.size() == 0) {
    const Matrix& val = tape_->value(v);
    return Matrix::Zero(val.rows(), val.cols());
  }
  return g;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return record(std::move(n));
}

Var Tape::parameter(std::string name, Matrix value) {
  for (std::size_t id : params_) {
    if (nodes_[id].name == name) {
      throw std::invalid_argument("Tape: parameter '" + name + "' registered twice");
    }
  }
  Node n;
  n.op = Op::parameter;
  n.value = std::move(value);
  n.name = std::move(name);
  Var v = record(std::move(n));
  params_.push_back(v.id);
  return v;
}

Var Tape::record(Op op, std::vector<std::size_t> inputs, Matrix value) {
  Node n;
  n.op = op;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  return record(std::move(n));
}

Var Tape::record(Node node) {
  for (std::size_t in : node.inputs) {
    if (in >= nodes_.size()) {
      throw std::logic_error("Tape: input node recorded out of order");
    }
  }
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

namespace {

// Adds `delta` into the adjoint slot, allocating it on first touch.
template <typename Expr>
void accumulate(std::vector<Matrix>& grads, const Tape& tape, std::size_t id, const Expr& delta) {
  Matrix& g = grads[id];
  if (g.size() == 0) {
    g = delta;
  } else {
    g += delta;
  }
  (void)tape;
}

Matrix& slot(std::vector<Matrix>& grads, const Tape& tape, std::size_t id) {
  Matrix& g = grads[id];
  if (g.size() == 0) {
    const Matrix& v = tape.node(id).value;
    g = Matrix::Zero(v.rows(), v.cols());
  }
  return g;
}

}  // namespace

NodeGradients Tape::gradients(Var loss) const {
  if (loss.tape != this) {
    throw std::invalid_argument("backward: loss node belongs to another tape");
  }
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + shape_string(lv));
  }

  // Only nodes that depend on a parameter carry adjoints.
  std::vector<char> live(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op == Op::parameter) {
      live[i] = 1;
      continue;
    }
    for (std::size_t in : n.inputs) {
      if (live[in]) {
        live[i] = 1;
        break;
      }
    }
  }

  std::vector<Matrix> grads(nodes_.size());
  grads[loss.id] = Matrix::Ones(1, 1);

  for (std::size_t idx = loss.id + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    if (grads[idx].size() == 0 || !live[idx] || n.inputs.empty()) {
      continue;
    }
    const Matrix& g = grads[idx];
    const auto& in = n.inputs;
    auto val = [&](std::size_t k) -> const Matrix& { return nodes_[in[k]].value; };
    auto want = [&](std::size_t k) { return live[in[k]] != 0; };

    switch (n.op) {
      case Op::constant:
      case Op::parameter:
        break;
      case Op::matmul:
        if (want(0)) accumulate(grads, *this, in[0], g * val(1).transpose());
        if (want(1)) accumulate(grads, *this, in[1], val(0).transpose() * g);
        break;
      case Op::add:
        if (want(0)) accumulate(grads, *this, in[0], g);
        if (want(1)) accumulate(grads, *this, in[1], g);
        break;
      case Op::sub:
        if (want(0)) accumulate(grads, *this, in[0], g);
        if (want(1)) accumulate(grads, *this, in[1], -g);
        break;
      case Op::mul:
        if (want(0)) accumulate(grads, *this, in[0], g.cwiseProduct(val(1)));
        if (want(1)) accumulate(grads, *this, in[1], g.cwiseProduct(val(0)));
        break;
      case Op::add_row:
        if (want(0)) accumulate(grads, *this, in[0], g);
        if (want(1)) accumulate(grads, *this, in[1], g.colwise().sum());
        break;
      case Op::mul_row: {
        const Matrix& a = val(0);
        const Matrix& row = val(1);
        if (want(0)) accumulate(grads, *this, in[0], (g.array().rowwise() * row.row(0).array()).matrix());
        if (want(1)) accumulate(grads, *this, in[1], g.cwiseProduct(a).colwise().sum());
        break;
      }
      case Op::mul_col: {
        const Matrix& a = val(0);
        const Matrix& col = val(1);
        if (want(0)) accumulate(grads, *this, in[0], (g.array().colwise() * col.col(0).array()).matrix());
        if (want(1)) accumulate(grads, *this, in[1], g.cwiseProduct(a).rowwise().sum());
        break;
      }
      case Op::scale:
        accumulate(grads, *this, in[0], n.scalar * g);
        break;
      case Op::tanh:
        accumulate(grads, *this, in[0], (g.array() * (1.0 - n.value.array().square())).matrix());
        break;
      case Op::sigmoid:
        accumulate(grads, *this, in[0], (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
        break;
      case Op::relu:
        accumulate(grads, *this, in[0], (g.array() * (val(0).array() > 0.0).cast<double>()).matrix());
        break;
      case Op::softmax_rows: {
        const Matrix& y = n.value;
        Vector dots = g.cwiseProduct(y).rowwise().sum();
        Matrix d = (g.colwise() - dots).cwiseProduct(y);
        accumulate(grads, *this, in[0], d);
        break;
      }
      case Op::concat_cols: {
        Index c = 0;
        for (std::size_t k = 0; k < in.size(); ++k) {
          const Index w = val(k).cols();
          if (want(k)) accumulate(grads, *this, in[k], g.middleCols(c, w));
          c += w;
        }
        break;
      }
      case Op::concat_rows: {
        Index r = 0;
        for (std::size_t k = 0; k < in.size(); ++k) {
          const Index h = val(k).rows();
          if (want(k)) accumulate(grads, *this, in[k], g.middleRows(r, h));
          r += h;
        }
        break;
      }
      case Op::slice:
        slot(grads, *this, in[0]).block(n.row0, n.col0, g.rows(), g.cols()) += g;
        break;
      case Op::reshape: {
        const Matrix& a = val(0);
        accumulate(grads, *this, in[0], Eigen::Map<const Matrix>(g.data(), a.rows(), a.cols()));
        break;
      }
      case Op::transpose:
        accumulate(grads, *this, in[0], g.transpose());
        break;
      case Op::sum: {
        const Matrix& a = val(0);
        accumulate(grads, *this, in[0], Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
        break;
      }
      case Op::mean: {
        const Matrix& a = val(0);
        const double w = g(0, 0) / static_cast<double>(a.size());
        accumulate(grads, *this, in[0], Matrix::Constant(a.rows(), a.cols(), w));
        break;
      }
      case Op::square:
        accumulate(grads, *this, in[0], 2.0 * g.cwiseProduct(val(0)));
        break;
      case Op::layer_norm_rows: {
        // dx = inv_sigma * (g - mean(g) - y * mean(g * y)), per row.
        const Matrix& y = n.value;
        const double width = static_cast<double>(y.cols());
        Vector mean_g = g.rowwise().sum() / width;
        Vector mean_gy = g.cwiseProduct(y).rowwise().sum() / width;
        Matrix d = g;
        d.colwise() -= mean_g;
        d -= (y.array().colwise() * mean_gy.array()).matrix();
        d = (d.array().colwise() * n.cache.col(0).array()).matrix();
        accumulate(grads, *this, in[0], d);
        break;
      }
    }
  }
  return NodeGradients(*this, std::move(grads));
}

GradientSet Tape::backward(Var loss) const {
  NodeGradients all = gradients(loss);
  GradientSet out;
  for (std::size_t id : params_) {
    const Node& n = nodes_[id];
    Matrix g = all.of(Var{const_cast<Tape*>(this), id});
    if (!all_finite(g)) {
      throw NumericError("backward: non-finite gradient for parameter '" + n.name + "'");
    }
    out.set(n.name, std::move(g));
  }
  return out;
}

namespace ad {

namespace {

Tape& tape_of(Var a) {
  if (a.tape == nullptr) {
    throw std::logic_error("autograd: Var not bound to a tape");
  }
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) {
    throw std::logic_error("autograd: operands live on different tapes");
  }
  return tape_of(a);
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(Op::matmul, {a.id, b.id}, deepseq::matmul(a.value(), b.value()));
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("add", a.value(), b.value());
  return t.record(Op::add, {a.id, b.id}, a.value() + b.value());
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("sub", a.value(), b.value());
  return t.record(Op::sub, {a.id, b.id}, a.value() - b.value());
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("mul", a.value(), b.value());
  return t.record(Op::mul, {a.id, b.id}, a.value().cwiseProduct(b.value()));
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  const Matrix& r = row.value();
  if (r.rows() != 1 || r.cols() != a.value().cols()) {
    throw ShapeError("add_row: cannot broadcast " + shape_string(r) + " onto " + shape_string(a.value()));
  }
  Matrix out = a.value();
  out.rowwise() += r.row(0);
  return t.record(Op::add_row, {a.id, row.id}, std::move(out));
}

Var mul_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  const Matrix& r = row.value();
  if (r.rows() != 1 || r.cols() != a.value().cols()) {
    throw ShapeError("mul_row: cannot broadcast " + shape_string(r) + " onto " + shape_string(a.value()));
  }
  Matrix out = (a.value().array().rowwise() * r.row(0).array()).matrix();
  return t.record(Op::mul_row, {a.id, row.id}, std::move(out));
}

Var mul_col(Var a, Var col) {
  Tape& t = tape_of(a, col);
  const Matrix& c = col.value();
  if (c.cols() != 1 || c.rows() != a.value().rows()) {
    throw ShapeError("mul_col: cannot broadcast " + shape_string(c) + " onto " + shape_string(a.value()));
  }
  Matrix out = (a.value().array().colwise() * c.col(0).array()).matrix();
  return t.record(Op::mul_col, {a.id, col.id}, std::move(out));
}

Var scale(Var a, double factor) {
  Tape& t = tape_of(a);
  Tape::Node n;
  n.op = Op::scale;
  n.inputs = {a.id};
  n.value = factor * a.value();
  n.scalar = factor;
  return t.record(std::move(n));
}

Var tanh(Var a) {
  return tape_of(a).record(Op::tanh, {a.id}, a.value().array().tanh().matrix());
}

Var sigmoid(Var a) {
  return tape_of(a).record(Op::sigmoid, {a.id}, deepseq::sigmoid(a.value()));
}

Var relu(Var a) {
  return tape_of(a).record(Op::relu, {a.id}, a.value().cwiseMax(0.0));
}

Var softmax_rows(Var a) {
  return tape_of(a).record(Op::softmax_rows, {a.id}, deepseq::softmax_rows(a.value()));
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) {
    throw ShapeError("concat_cols: nothing to concatenate");
  }
  Tape& t = tape_of(parts.front());
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (Var p : parts) {
    tape_of(parts.front(), p);
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_string(p.value()) + " vs " +
                       shape_string(parts.front().value()));
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids;
  Index c = 0;
  for (Var p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
    ids.push_back(p.id);
  }
  return t.record(Op::concat_cols, std::move(ids), std::move(out));
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) {
    throw ShapeError("concat_rows: nothing to concatenate");
  }
  Tape& t = tape_of(parts.front());
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (Var p : parts) {
    tape_of(parts.front(), p);
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: column mismatch " + shape_string(p.value()) + " vs " +
                       shape_string(parts.front().value()));
    }
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids;
  Index r = 0;
  for (Var p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
    ids.push_back(p.id);
  }
  return t.record(Op::concat_rows, std::move(ids), std::move(out));
}

Var slice(Var a, Index row0, Index rows, Index col0, Index cols) {
  Tape& t = tape_of(a);
  const Matrix& v = a.value();
  if (row0 < 0 || col0 < 0 || rows < 0 || cols < 0 || row0 + rows > v.rows() || col0 + cols > v.cols()) {
    throw ShapeError("slice: block [" + std::to_string(row0) + "+" + std::to_string(rows) + ", " +
                     std::to_string(col0) + "+" + std::to_string(cols) + "] outside " + shape_string(v));
  }
  Tape::Node n;
  n.op = Op::slice;
  n.inputs = {a.id};
  n.value = v.block(row0, col0, rows, cols);
  n.row0 = row0;
  n.col0 = col0;
  return t.record(std::move(n));
}

Var slice_cols(Var a, Index col0, Index cols) { return slice(a, 0, a.rows(), col0, cols); }

Var reshape(Var a, Index rows, Index cols) {
  const Matrix& v = a.value();
  if (rows * cols != v.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(v) + " as " + shape_string(rows, cols));
  }
  Matrix out = Eigen::Map<const Matrix>(v.data(), rows, cols);
  return tape_of(a).record(Op::reshape, {a.id}, std::move(out));
}

Var transpose(Var a) {
  Matrix out = a.value().transpose();
  return tape_of(a).record(Op::transpose, {a.id}, std::move(out));
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return tape_of(a).record(Op::sum, {a.id}, std::move(out));
}

Var mean(Var a) {
  if (a.value().size() == 0) {
    throw ShapeError("mean: empty matrix");
  }
  Matrix out(1, 1);
  out(0, 0) = a.value().mean();
  return tape_of(a).record(Op::mean, {a.id}, std::move(out));
}

Var square(Var a) {
  return tape_of(a).record(Op::square, {a.id}, a.value().array().square().matrix());
}

Var layer_norm_rows(Var a, double eps) {
  const Matrix& x = a.value();
  if (x.cols() == 0) {
    throw ShapeError("layer_norm_rows: zero-width input");
  }
  const double width = static_cast<double>(x.cols());
  Tape::Node n;
  n.op = Op::layer_norm_rows;
  n.inputs = {a.id};
  n.value.resize(x.rows(), x.cols());
  n.cache.resize(x.rows(), 1);
  for (Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).sum() / width;
    const double var = (x.row(r).array() - mu).square().sum() / width;
    const double inv_sigma = 1.0 / std::sqrt(var + eps);
    n.value.row(r) = (x.row(r).array() - mu) * inv_sigma;
    n.cache(r, 0) = inv_sigma;
  }
  return tape_of(a).record(std::move(n));
}

}  // namespace ad

}  // namespace deepseq
