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

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace flowgpr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Positive GPR hyperparameters: per-covariate inverse-lengthscale weights,
/// a shared scale tau (inverse kernel amplitude and global shrinkage scale)
/// and the observation-noise variance.
struct HyperParams {
  Vec theta;      // elementwise >= 0, length d
  double tau = 1.0;
  double sigma2 = 1.0;

  Index dim() const { return theta.size(); }

  void validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("HyperParams: tau must be > 0");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("HyperParams: sigma2 must be > 0");
    for (Index j = 0; j < theta.size(); ++j) {
      if (!(theta[j] >= 0.0))
        throw std::invalid_argument("HyperParams: theta must be elementwise >= 0");
    }
  }

  // Flat layout (theta_1..theta_d, tau, sigma2) used by the variational engine.
  Vec to_vector() const {
    Vec xi(theta.size() + 2);
    xi.head(theta.size()) = theta;
    xi[theta.size()] = tau;
    xi[theta.size() + 1] = sigma2;
    return xi;
  }

  static HyperParams from_vector(const Vec& xi) {
    if (xi.size() < 2) throw std::invalid_argument("HyperParams: vector too short");
    HyperParams p;
    p.theta = xi.head(xi.size() - 2);
    p.tau = xi[xi.size() - 2];
    p.sigma2 = xi[xi.size() - 1];
    return p;
  }
};

/// Cholesky factorization failed; carries the first non-positive pivot.
class FactorizationError : public std::runtime_error {
 public:
  FactorizationError(const std::string& what, Index pivot)
      : std::runtime_error(what), pivot_(pivot) {}
  Index pivot() const { return pivot_; }

 private:
  Index pivot_;
};

/// Numerical failure outside factorization (non-convergence, non-finite values).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flowgpr
