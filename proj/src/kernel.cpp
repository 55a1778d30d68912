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

#include "flowgpr/kernel.hpp"

#include <cmath>

namespace flowgpr::kernel {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_finite(const Mat& X, const char* who) {
  if (!X.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite entries");
}

// Pairwise weighted squared distances via the Gram expansion
// d2_ij = q_i + q_j - 2 g_ij; tiny negative values from cancellation are
// clamped to zero.
Mat weighted_sq_distances(const Mat& A, const Mat& B, const Vec& theta) {
  const Vec w = theta.cwiseMax(0.0).cwiseSqrt();
  const Mat Aw = A * w.asDiagonal();
  const Mat Bw = B * w.asDiagonal();
  const Vec qa = Aw.rowwise().squaredNorm();
  const Vec qb = Bw.rowwise().squaredNorm();
  Mat d2 = -2.0 * (Aw * Bw.transpose());
  d2.colwise() += qa;
  d2.rowwise() += qb.transpose();
  return d2.cwiseMax(0.0);
}

}  // namespace

Mat kernel_matrix(const Mat& X, const HyperParams& params) {
  params.validate();
  check_finite(X, "kernel_matrix");
  if (X.cols() != params.theta.size())
    throw std::invalid_argument("kernel_matrix: covariate dimension mismatch");
  const Index n = X.rows();
  const double inv_tau = 1.0 / params.tau;
  const Mat d2 = weighted_sq_distances(X, X, params.theta);
  Mat K(n, n);
  for (Index i = 0; i < n; ++i) {
    K(i, i) = inv_tau;
    for (Index j = 0; j < i; ++j) {
      const double v = inv_tau * std::exp(-0.5 * d2(i, j));
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

Mat build_covariance(const Mat& X, const HyperParams& params, double jitter) {
  if (!(jitter >= 0.0)) throw std::invalid_argument("build_covariance: jitter must be >= 0");
  Mat K = kernel_matrix(X, params);
  K.diagonal().array() += params.sigma2 + jitter;
  return K;
}

Vec KernelMatrixFactor::solve(const Vec& rhs) const {
  Vec v = chol_lower.triangularView<Eigen::Lower>().solve(rhs);
  return chol_lower.transpose().triangularView<Eigen::Upper>().solve(v);
}

Mat KernelMatrixFactor::solve_matrix(const Mat& rhs) const {
  Mat v = chol_lower.triangularView<Eigen::Lower>().solve(rhs);
  return chol_lower.transpose().triangularView<Eigen::Upper>().solve(v);
}

Mat KernelMatrixFactor::lower_solve(const Mat& rhs) const {
  return chol_lower.triangularView<Eigen::Lower>().solve(rhs);
}

KernelMatrixFactor factorize(const Mat& K_plus_noise) {
  const Index n = K_plus_noise.rows();
  if (K_plus_noise.cols() != n) throw std::invalid_argument("factorize: matrix must be square");
  const double scale = std::max(1.0, K_plus_noise.cwiseAbs().maxCoeff());
  const double asym = (K_plus_noise - K_plus_noise.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale)
    throw std::invalid_argument("factorize: matrix not symmetric within 1e-10");

  Eigen::LLT<Mat> llt(K_plus_noise);
  if (llt.info() != Eigen::Success) {
    // Rerun an unblocked factorization to report the failing pivot.
    Mat L = Mat::Zero(n, n);
    for (Index j = 0; j < n; ++j) {
      double d = K_plus_noise(j, j) - L.row(j).head(j).squaredNorm();
      if (!(d > 0.0))
        throw FactorizationError("factorize: matrix not positive definite at pivot " +
                                     std::to_string(j),
                                 j);
      L(j, j) = std::sqrt(d);
      for (Index i = j + 1; i < n; ++i)
        L(i, j) = (K_plus_noise(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
    }
    throw FactorizationError("factorize: factorization failed", n - 1);
  }

  KernelMatrixFactor f;
  f.chol_lower = llt.matrixL();
  f.n = n;
  f.log_det = 2.0 * f.chol_lower.diagonal().array().log().sum();
  return f;
}

KernelMatrixFactor factorize_auto(const Mat& K_plus_noise) {
  // Clean attempt first (keeps the likelihood free of jitter bias), then a
  // base jitter of 1e-8 * mean(diag) escalated by 10x for up to 3 retries.
  try {
    return factorize(K_plus_noise);
  } catch (const FactorizationError&) {
  }
  double jitter = 1e-8 * K_plus_noise.diagonal().mean();
  for (int retry = 0;; ++retry) {
    Mat C = K_plus_noise;
    C.diagonal().array() += jitter;
    try {
      return factorize(C);
    } catch (const FactorizationError&) {
      if (retry >= 2) throw;
      jitter *= 10.0;
    }
  }
}

double log_marginal_likelihood(const Vec& y, const Mat& X, const HyperParams& params) {
  if (y.size() != X.rows())
    throw std::invalid_argument("log_marginal_likelihood: y and X not conformable");
  const Mat C = build_covariance(X, params, 0.0);
  const KernelMatrixFactor f = factorize_auto(C);
  const Vec alpha = f.solve(y);
  const double quad = y.dot(alpha);
  return -0.5 * static_cast<double>(y.size()) * kLog2Pi - 0.5 * f.log_det - 0.5 * quad;
}

LogLikGrad log_marginal_likelihood_grad(const Vec& y, const Mat& X, const HyperParams& params) {
  if (y.size() != X.rows())
    throw std::invalid_argument("log_marginal_likelihood_grad: y and X not conformable");
  const Index n = X.rows();
  const Mat Kf = kernel_matrix(X, params);
  Mat C = Kf;
  C.diagonal().array() += params.sigma2;
  const KernelMatrixFactor f = factorize_auto(C);
  const Vec alpha = f.solve(y);
  const double quad = y.dot(alpha);

  const Mat Cinv = f.solve_matrix(Mat::Identity(n, n));
  const Mat G = 0.5 * (alpha * alpha.transpose() - Cinv);

  // dC_ij/dtheta_l = -K_ij (x_il - x_jl)^2 / 2, dC/dtau = -K/tau,
  // dC_ij/dsigma2 = [i == j].
  const Mat M = G.cwiseProduct(Kf);
  const Vec r = M.rowwise().sum();
  const Mat T = M * X;

  LogLikGrad out;
  out.value_unnorm = -0.5 * f.log_det - 0.5 * quad;
  out.value = out.value_unnorm - 0.5 * static_cast<double>(n) * kLog2Pi;
  out.dtheta = (X.cwiseProduct(T)).colwise().sum().transpose() -
               (X.cwiseProduct(X).transpose() * r);
  out.dtau = -M.sum() / params.tau;
  out.dsigma2 = G.trace();
  return out;
}

std::pair<Vec, Vec> predictive_distribution(const Mat& X_train, const Vec& y_train,
                                            const Mat& X_test, const HyperParams& params) {
  if (X_train.cols() != X_test.cols())
    throw std::invalid_argument("predictive_distribution: covariate dimension mismatch");
  if (y_train.size() != X_train.rows())
    throw std::invalid_argument("predictive_distribution: y and X not conformable");
  params.validate();
  check_finite(X_test, "predictive_distribution");

  const Mat C = build_covariance(X_train, params, 0.0);
  const KernelMatrixFactor f = factorize_auto(C);
  const Vec alpha = f.solve(y_train);

  const double inv_tau = 1.0 / params.tau;
  const Mat d2 = weighted_sq_distances(X_test, X_train, params.theta);
  const Mat K_cross = inv_tau * (-0.5 * d2.array()).exp();

  const Vec mean = K_cross * alpha;
  const Mat V = f.lower_solve(K_cross.transpose());
  Vec var(X_test.rows());
  for (Index i = 0; i < X_test.rows(); ++i) {
    var[i] = inv_tau + params.sigma2 - V.col(i).squaredNorm();
    if (!(var[i] > 0.0))
      throw NumericalError("predictive_distribution: non-positive predictive variance");
  }
  return {mean, var};
}

}  // namespace flowgpr::kernel
