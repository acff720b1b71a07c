#include "deepseq/tensor.hpp"

#include <sstream>

namespace deepseq {

std::string shape_string(Index rows, Index cols) {
  std::ostringstream os;
  os << '(' << rows << 'x' << cols << ')';
  return os.str();
}

void require_finite(const Matrix& m, std::string_view what) {
  if (!all_finite(m)) {
    throw NumericError(std::string(what) + ": non-finite value in " + shape_string(m) + " matrix");
  }
}

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const auto n_rows = static_cast<Index>(rows.size());
  const auto n_cols = n_rows == 0 ? Index{0} : static_cast<Index>(rows.begin()->size());
  Matrix m(n_rows, n_cols);
  Index r = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != n_cols) {
      throw ShapeError("from_rows: ragged row " + std::to_string(r));
    }
    Index c = 0;
    for (double v : row) {
      m(r, c++) = v;
    }
    ++r;
  }
  require_finite(m, "from_rows");
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + shape_string(a) + " by " + shape_string(b));
  }
  Matrix out = a * b;
  return out;
}

Matrix ewise(const Matrix& a, const Matrix& b, Ewise kind) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("ewise: shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
  switch (kind) {
    case Ewise::add:
      return a + b;
    case Ewise::sub:
      return a - b;
    case Ewise::mul:
      return a.cwiseProduct(b);
  }
  throw std::logic_error("ewise: unknown kind");
}

Matrix activate(const Matrix& x, Activation kind) {
  switch (kind) {
    case Activation::identity:
      return x;
    case Activation::tanh:
      return x.array().tanh().matrix();
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::relu:
      return x.cwiseMax(0.0);
  }
  throw std::logic_error("activate: unknown kind");
}

Vector softmax(std::span<const double> scores) {
  if (scores.empty()) {
    throw ShapeError("softmax: empty score vector");
  }
  Eigen::Map<const Vector> view(scores.data(), static_cast<Index>(scores.size()));
  return softmax(view);
}

Matrix softmax_rows(const Matrix& scores) {
  if (scores.cols() == 0) {
    throw ShapeError("softmax_rows: zero-width score matrix");
  }
  Matrix out(scores.rows(), scores.cols());
  for (Index r = 0; r < scores.rows(); ++r) {
    const double shift = scores.row(r).maxCoeff();
    out.row(r) = (scores.row(r).array() - shift).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

}  // namespace deepseq
