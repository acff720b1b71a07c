#include "deepseq/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace deepseq;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Triple loop, independent of Eigen's product kernels.
Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j)
      for (Index k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

}  // namespace

TEST(Matmul, IdentityLeavesColumn) {
  EXPECT_EQ(matmul(Matrix::Identity(2, 2), from_rows({{3}, {4}})), from_rows({{3}, {4}}));
}

TEST(Matmul, HandProduct) {
  EXPECT_EQ(matmul(from_rows({{1, 2}, {3, 4}}), from_rows({{5}, {6}})), from_rows({{17}, {39}}));
}

TEST(Matmul, MismatchNamesBothShapes) {
  try {
    matmul(Matrix::Zero(2, 3), Matrix::Zero(2, 2));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2x3)"), std::string::npos);
    EXPECT_NE(msg.find("(2x2)"), std::string::npos);
  }
}

TEST(Matmul, MatchesTripleLoop) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<Index> dim(1, 8);
    const Index n = dim(rng), k = dim(rng), m = dim(rng);
    const Matrix a = random_matrix(n, k, rng);
    const Matrix b = random_matrix(k, m, rng);
    EXPECT_LT((matmul(a, b) - naive_product(a, b)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Matmul, AssociativeOnRandomTriples) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Index> dim(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const Index p = dim(rng), q = dim(rng), r = dim(rng), s = dim(rng);
    const Matrix a = random_matrix(p, q, rng);
    const Matrix b = random_matrix(q, r, rng);
    const Matrix c = random_matrix(r, s, rng);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    const double scale = std::max(1.0, left.cwiseAbs().maxCoeff());
    EXPECT_LT((left - right).cwiseAbs().maxCoeff() / scale, 1e-10);
  }
}

TEST(Ewise, Basics) {
  EXPECT_EQ(ewise(from_rows({{1, 2}}), from_rows({{0, 0}}), Ewise::add), from_rows({{1, 2}}));
  EXPECT_EQ(ewise(from_rows({{1, 0}, {0, 1}}), from_rows({{5, 7}, {9, 11}}), Ewise::mul),
            from_rows({{5, 0}, {0, 11}}));
  const Matrix x = from_rows({{1.5, -2}, {3, 0.25}});
  EXPECT_EQ(ewise(x, x, Ewise::sub), Matrix::Zero(2, 2));
  EXPECT_THROW(ewise(Matrix::Zero(1, 2), Matrix::Zero(2, 1), Ewise::add), ShapeError);
}

TEST(FromRows, RejectsRaggedAndNonFinite) {
  EXPECT_THROW(from_rows({{1, 2}, {3}}), ShapeError);
  EXPECT_THROW(from_rows({{1, std::nan("")}}), NumericError);
  EXPECT_THROW(require_finite(Matrix::Constant(1, 1, INFINITY), "x"), NumericError);
}

TEST(Activate, KnownValues) {
  EXPECT_EQ(activate(Matrix::Zero(1, 1), Activation::tanh)(0, 0), 0.0);
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(10.0), 1.0 / (1.0 + std::exp(-10.0)), 1e-16);
  EXPECT_NEAR(sigmoid(10.0), 0.9999546, 1e-7);
  EXPECT_EQ(activate(from_rows({{-1, 2}}), Activation::relu), from_rows({{0, 2}}));
  EXPECT_EQ(activate(from_rows({{-1, 2}}), Activation::identity), from_rows({{-1, 2}}));
}

TEST(Activate, RangesAndSaturation) {
  const Matrix x = from_rows({{-800, -30, -1, 0, 1, 30, 800}});
  const Matrix s = activate(x, Activation::sigmoid);
  const Matrix t = activate(x, Activation::tanh);
  EXPECT_TRUE(all_finite(s));
  for (Index j = 0; j < x.cols(); ++j) {
    EXPECT_GE(s(0, j), 0.0);
    EXPECT_LE(s(0, j), 1.0);
    EXPECT_LE(std::abs(t(0, j)), 1.0);
  }
  EXPECT_GT(s(0, 2), 0.0);
  EXPECT_LT(s(0, 4), 1.0);
}

TEST(Activate, SigmoidSymmetryAndTanhIdentity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng);
    EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-12);
    EXPECT_NEAR(std::tanh(x), 2.0 * sigmoid(2.0 * x) - 1.0, 1e-12);
  }
}

TEST(Softmax, ConstantScoresAreUniform) {
  for (double c : {-1e6, -3.0, 0.0, 7.5, 1e6}) {
    const std::vector<double> s(4, c);
    const Vector p = softmax(std::span<const double>(s));
    for (Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(p(i), 0.25);
  }
}

TEST(Softmax, ClosedFormRatio) {
  const std::vector<double> s{0.0, std::log(3.0)};
  const Vector p = softmax(std::span<const double>(s));
  EXPECT_NEAR(p(0), 0.25, 1e-15);
  EXPECT_NEAR(p(1), 0.75, 1e-15);
}

TEST(Softmax, LargeScoresDoNotOverflow) {
  const std::vector<double> s{1000.0, 0.0};
  const Vector p = softmax(std::span<const double>(s));
  EXPECT_TRUE(all_finite(p));
  EXPECT_NEAR(p(0), 1.0, 1e-15);
  EXPECT_NEAR(p(1), 0.0, 1e-15);
}

TEST(Softmax, EmptyRejected) {
  EXPECT_THROW(softmax(std::span<const double>()), ShapeError);
  EXPECT_THROW(softmax_rows(Matrix(2, 0)), ShapeError);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int trial = 0; trial < 500; ++trial) {
    const Index n = 1 + trial % 9;
    Vector s(n);
    for (Index i = 0; i < n; ++i) s(i) = u(rng);
    const Vector p = softmax(s);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_GE(p.minCoeff(), 0.0);
    const Vector shifted = softmax((s.array() + u(rng)).matrix());
    EXPECT_LT((p - shifted).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Softmax, RowsMatchVectorForm) {
  std::mt19937_64 rng(9);
  const Matrix m = random_matrix(5, 6, rng) * 10.0;
  const Matrix p = softmax_rows(m);
  for (Index r = 0; r < m.rows(); ++r) {
    const Vector row = softmax(m.row(r).transpose());
    EXPECT_LT((p.row(r).transpose() - row).cwiseAbs().maxCoeff(), 1e-15);
  }
}
