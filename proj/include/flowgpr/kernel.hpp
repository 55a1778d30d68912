// Copyright 2026 the flowgpr authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <utility>

#include "flowgpr/types.hpp"

namespace flowgpr::kernel {

/// Weighted anisotropic distance sqrt(sum_j (z_j - z'_j)^2 theta_j).
template <typename DA, typename DB, typename DT>
double aniso_distance(const Eigen::MatrixBase<DA>& z, const Eigen::MatrixBase<DB>& z_prime,
                      const Eigen::MatrixBase<DT>& theta) {
  if (z.size() != z_prime.size() || z.size() != theta.size())
    throw std::invalid_argument("aniso_distance: dimension mismatch");
  double acc = 0.0;
  for (Index j = 0; j < z.size(); ++j) {
    if (!(theta[j] >= 0.0))
      throw std::invalid_argument("aniso_distance: theta must be elementwise >= 0");
    const double diff = z[j] - z_prime[j];
    acc += diff * diff * theta[j];
  }
  return std::sqrt(acc);
}

/// Squared exponential kernel (1/tau) exp(-delta^2 / 2) with the weighted
/// distance above. Value lies in (0, 1/tau].
template <typename DA, typename DB>
double se_kernel(const Eigen::MatrixBase<DA>& z, const Eigen::MatrixBase<DB>& z_prime,
                 const HyperParams& params) {
  params.validate();
  const double delta = aniso_distance(z, z_prime, params.theta);
  return std::exp(-0.5 * delta * delta) / params.tau;
}

/// N x N kernel matrix without the noise term (diagonal 1/tau).
Mat kernel_matrix(const Mat& X, const HyperParams& params);

/// Kernel matrix plus (sigma2 + jitter) I. Symmetric by construction.
Mat build_covariance(const Mat& X, const HyperParams& params, double jitter);

/// Cholesky factor of a covariance matrix together with its log determinant.
struct KernelMatrixFactor {
  Mat chol_lower;
  double log_det = 0.0;
  Index n = 0;

  Vec solve(const Vec& rhs) const;       // (L L^T)^{-1} rhs
  Mat solve_matrix(const Mat& rhs) const;
  Mat lower_solve(const Mat& rhs) const; // L^{-1} rhs
};

/// Cholesky factorization. Throws FactorizationError (with the failing pivot
/// index) if the matrix is not positive definite, std::invalid_argument if it
/// is not symmetric to 1e-10.
KernelMatrixFactor factorize(const Mat& K_plus_noise);

/// Factorization with the jitter ladder: a clean attempt first, then a base
/// jitter of 1e-8 * mean(diag) multiplied by 10 up to 3 retries before the
/// error is surfaced.
KernelMatrixFactor factorize_auto(const Mat& K_plus_noise);

/// Full log marginal likelihood
///   -(N/2) log(2 pi) - 1/2 log|K + sigma2 I| - 1/2 y^T (K + sigma2 I)^{-1} y
/// evaluated via Cholesky and triangular solves.
double log_marginal_likelihood(const Vec& y, const Mat& X, const HyperParams& params);

struct LogLikGrad {
  double value = 0.0;         // full log marginal likelihood
  double value_unnorm = 0.0;  // without the -(N/2) log(2 pi) constant
  Vec dtheta;
  double dtau = 0.0;
  double dsigma2 = 0.0;
};

/// Likelihood value and its gradient with respect to (theta, tau, sigma2).
/// Uses the matrix adjoint d loglik / dC = (alpha alpha^T - C^{-1}) / 2 with
/// alpha = C^{-1} y, contracted against the kernel derivatives.
LogLikGrad log_marginal_likelihood_grad(const Vec& y, const Mat& X, const HyperParams& params);

/// GP predictive mean and variance (noise-inclusive) at the test inputs.
std::pair<Vec, Vec> predictive_distribution(const Mat& X_train, const Vec& y_train,
                                            const Mat& X_test, const HyperParams& params);

}  // namespace flowgpr::kernel
