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

#include <optional>
#include <vector>

#include "flowgpr/types.hpp"

namespace flowgpr::prior {

/// Shrinkage-prior hyperparameters: a controls the pole at the origin,
/// c the tail heaviness, sigma2_rate the exponential prior rate on the
/// observation-noise variance.
struct TripleGammaConfig {
  double a = 0.1;
  double c = 0.1;
  double sigma2_rate = 10.0;

  void validate() const {
    if (!(a > 0.0) || !(c > 0.0))
      throw std::invalid_argument("TripleGammaConfig: a and c must be > 0");
    if (!(sigma2_rate > 0.0))
      throw std::invalid_argument("TripleGammaConfig: sigma2_rate must be > 0");
  }
};

/// Normalized log density of the local-scale-marginalized prior on theta_j:
///   log Gamma(c + 1/2) - 1/2 log(2 pi kappa theta) - log B(a, c)
///     + log U(c + 1/2, 3/2 - a, theta / (2 kappa)),   kappa = tau c / a.
double log_triple_gamma(double theta, const TripleGammaConfig& cfg, double tau);

struct TripleGammaGrad {
  double value = 0.0;
  double dtheta = 0.0;
  double dtau = 0.0;
};

TripleGammaGrad log_triple_gamma_grad(double theta, const TripleGammaConfig& cfg, double tau);

/// Unnormalized log density of tau ~ F(2c, 2a):
///   (c - 1) log tau - (c + a) log(1 + (c/a) tau).
double log_f_prior_tau(double tau, const TripleGammaConfig& cfg);
double log_f_prior_tau_dtau(double tau, const TripleGammaConfig& cfg);

/// Unnormalized exponential log prior on sigma2: -rate * sigma2.
double log_exp_prior_sigma2(double sigma2, const TripleGammaConfig& cfg);

/// One draw from the (optionally hierarchical) prior hierarchy.
struct PriorDraw {
  Vec theta;   // >= 0
  double tau = 1.0;
  Vec lambda;  // local scales, > 0
  Vec rho;     // shrinkage factors 1 / (1 + tau lambda_j), in [0, 1]
};

/// Draws lambda_j ~ F(2a, 2c) i.i.d., tau ~ F(2c, 2a) (or tau_fixed when not
/// hierarchical) and theta_j ~ Gamma(1/2, rate 1/(2 tau lambda_j)).
PriorDraw sample_hierarchy(Index d, const TripleGammaConfig& cfg, bool hierarchical,
                           std::optional<double> tau_fixed, std::uint64_t seed);

/// Number of shrinkage factors strictly below 1/2.
int model_size(const Vec& rho);

/// Median of the tau prior F(2c, 2a); exactly 1 when a == c, otherwise a
/// deterministic Monte Carlo estimate.
double tau_prior_median(const TripleGammaConfig& cfg);

/// Empirical prior distribution of the inclusion probability pi and of the
/// model size K. For each outer draw of tau, pi(tau) = Pr(rho_j < 1/2 | tau)
/// is estimated by inner Monte Carlo over lambda and one K ~ Binom(d, pi) is
/// recorded. With a fixed tau the study degenerates to a single pi.
struct PriorStudy {
  Vec pi;                 // one entry per outer draw
  std::vector<int> k;     // one entry per outer draw
};

PriorStudy prior_model_size_study(Index d, const TripleGammaConfig& cfg, int outer_draws,
                                  int inner_draws, bool hierarchical,
                                  std::optional<double> tau_fixed, std::uint64_t seed);

}  // namespace flowgpr::prior
