#include "deepseq/data.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <random>

namespace deepseq {

namespace {

constexpr int kLags = 12;
constexpr int kBurnIn = 120;
constexpr double kInitialScale = 0.05;

std::array<double, kLags> ar_coefficients(double a, double b) {
  std::array<double, kLags> phi{};
  phi[0] = phi[1] = phi[2] = a / 3.0;
  phi[11] += b;
  return phi;
}

bool stationary(const std::array<double, kLags>& phi) {
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(kLags, kLags);
  for (int j = 0; j < kLags; ++j) companion(0, j) = phi[static_cast<std::size_t>(j)];
  for (int i = 1; i < kLags; ++i) companion(i, i - 1) = 1.0;
  const Eigen::VectorXcd eig = companion.eigenvalues();
  return eig.cwiseAbs().maxCoeff() < 1.0 - 1e-9;
}

std::string asset_name(Index i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "A%04lld", static_cast<long long>(i));
  return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_assets < 2) throw DataError("synthetic: n_assets must be at least 2");
  // One 12-month window plus its next-month target.
  if (n_months < kWindowLength + 2) {
    throw DataError("synthetic: n_months must be at least " + std::to_string(kWindowLength + 2));
  }
  if (!std::isfinite(noise_std) || noise_std < 0.0) throw DataError("synthetic: noise_std must be >= 0");
  if (!std::isfinite(momentum_coeff) || !std::isfinite(reversal_coeff)) {
    throw DataError("synthetic: coefficients must be finite");
  }
  if (!stationary(ar_coefficients(momentum_coeff, reversal_coeff))) {
    throw DataError("synthetic: momentum/reversal coefficients give a non-stationary return process");
  }
}

SyntheticOracle synthetic_oracle(double momentum_coeff, double reversal_coeff, double noise_std) {
  const auto phi = ar_coefficients(momentum_coeff, reversal_coeff);
  if (!stationary(phi)) {
    throw DataError("synthetic: momentum/reversal coefficients give a non-stationary return process");
  }
  SyntheticOracle oracle;
  oracle.signal_features = {"Ret", "Ret_max"};
  const bool no_signal = momentum_coeff == 0.0 && reversal_coeff == 0.0;
  if (noise_std == 0.0) {
    oracle.r2_ceiling = no_signal ? 0.0 : 1.0;
    oracle.return_variance = 0.0;
    return oracle;
  }

  // Unknowns gamma_0..gamma_12 with gamma_k = sum_j phi_j gamma_|k-j| for k >= 1
  // and gamma_0 = sum_j phi_j gamma_j + sigma^2.
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(kLags + 1, kLags + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(kLags + 1);
  rhs(0) = noise_std * noise_std;
  for (int k = 0; k <= kLags; ++k) {
    for (int j = 1; j <= kLags; ++j) {
      A(k, std::abs(k - j)) -= phi[static_cast<std::size_t>(j - 1)];
    }
  }
  const Eigen::VectorXd gamma = A.fullPivLu().solve(rhs);
  oracle.return_variance = gamma(0);
  oracle.r2_ceiling = 1.0 - rhs(0) / gamma(0);
  return oracle;
}

SyntheticPanel gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto phi = ar_coefficients(spec.momentum_coeff, spec.reversal_coeff);
  const std::size_t ret_col = feature_index("Ret");
  const std::size_t ret_max_col = feature_index("Ret_max");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const Index total = kBurnIn + spec.n_months;
  std::vector<PanelRow> rows;
  rows.reserve(static_cast<std::size_t>(spec.n_assets * spec.n_months));
  std::vector<double> r(static_cast<std::size_t>(total + kLags), 0.0);

  for (Index a = 0; a < spec.n_assets; ++a) {
    const std::string id = asset_name(a);
    const double u = unit(rng);
    const Exchange exchange = a == 0 ? Exchange::nyse
                              : u < 0.4 ? Exchange::nyse
                              : u < 0.5 ? Exchange::amex
                                        : Exchange::nasdaq;
    double cap = std::exp(4.0 + 1.5 * normal(rng));

    // r[kLags + t] is month t of the simulation. The pre-sample history is
    // drawn once so that a noiseless process does not sit at zero.
    for (int j = 0; j < kLags; ++j) r[static_cast<std::size_t>(j)] = kInitialScale * normal(rng);
    for (Index t = 0; t < total; ++t) {
      const std::size_t s = static_cast<std::size_t>(kLags + t);
      double v = spec.noise_std * normal(rng);
      for (int j = 1; j <= kLags; ++j) v += phi[static_cast<std::size_t>(j - 1)] * r[s - static_cast<std::size_t>(j)];
      r[s] = v;
    }

    for (Index m = 0; m < spec.n_months; ++m) {
      const double rt = r[static_cast<std::size_t>(kLags + kBurnIn + m)];
      PanelRow row;
      row.asset_id = id;
      row.month = spec.start.plus(static_cast<int>(m));
      row.excess_return = rt;
      row.exchange = exchange;
      cap *= std::max(1.0 + rt, 0.01);
      row.market_cap = cap;
      for (std::size_t f = 0; f < kNumFeatures; ++f) row.features[f] = normal(rng);
      row.features[ret_col] = rt;
      row.features[ret_max_col] = rt + 0.25 * spec.noise_std * normal(rng);
      rows.push_back(std::move(row));
    }
  }

  return SyntheticPanel{PanelDataset(std::move(rows)),
                        synthetic_oracle(spec.momentum_coeff, spec.reversal_coeff, spec.noise_std)};
}

}  // namespace deepseq
