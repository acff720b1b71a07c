#ifndef DEEPSEQ_TENSOR_HPP
#define DEEPSEQ_TENSOR_HPP

#include <Eigen/Core>

#include <cmath>
#include <concepts>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace deepseq {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense row-major matrix of doubles. Every model quantity (inputs, hidden
/// states, gates, weights) lives in one of these.
using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Ewise { add, sub, mul };
enum class Activation { identity, tanh, sigmoid, relu };

std::string shape_string(Index rows, Index cols);

template <typename Derived>
std::string shape_string(const Eigen::EigenBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

/// Throws NumericError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);

/// Builds a matrix from nested rows, rejecting ragged or non-finite input.
Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix ewise(const Matrix& a, const Matrix& b, Ewise kind);

template <std::floating_point Scalar>
Scalar sigmoid(Scalar x) {
  // Split on sign so exp never overflows.
  if (x >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
MatrixX<typename Derived::Scalar> sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([](S v) { return sigmoid(v); });
}

Matrix activate(const Matrix& x, Activation kind);

/// Max-shifted softmax over a flat score vector.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& scores) {
  using S = typename Derived::Scalar;
  if (scores.size() == 0) {
    throw ShapeError("softmax: empty score vector");
  }
  const S shift = scores.maxCoeff();
  VectorX<S> e = (scores.reshaped().array() - shift).exp().matrix();
  return e / e.sum();
}

Vector softmax(std::span<const double> scores);

/// Row-wise softmax: each row of the result is a probability vector.
Matrix softmax_rows(const Matrix& scores);

}  // namespace deepseq

#endif  // DEEPSEQ_TENSOR_HPP
