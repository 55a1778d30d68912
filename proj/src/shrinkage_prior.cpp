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

#include "flowgpr/shrinkage_prior.hpp"

#include <algorithm>
#include <cmath>

#include "flowgpr/random.hpp"
#include "flowgpr/special_functions.hpp"

namespace flowgpr::prior {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_args(double theta, const TripleGammaConfig& cfg, double tau) {
  cfg.validate();
  if (!(theta > 0.0)) throw std::domain_error("log_triple_gamma: theta must be > 0");
  if (!(tau > 0.0)) throw std::domain_error("log_triple_gamma: tau must be > 0");
}
}  // namespace

double log_triple_gamma(double theta, const TripleGammaConfig& cfg, double tau) {
  check_args(theta, cfg, tau);
  const double kappa = tau * cfg.c / cfg.a;
  return special::log_gamma(cfg.c + 0.5) - 0.5 * (kLog2Pi + std::log(kappa) + std::log(theta)) -
         special::log_beta(cfg.a, cfg.c) +
         special::log_hyp_u(cfg.c + 0.5, 1.5 - cfg.a, theta / (2.0 * kappa));
}

TripleGammaGrad log_triple_gamma_grad(double theta, const TripleGammaConfig& cfg, double tau) {
  check_args(theta, cfg, tau);
  const double kappa = tau * cfg.c / cfg.a;
  const double z = theta / (2.0 * kappa);
  const special::HypUResult u = special::log_hyp_u_grad(cfg.c + 0.5, 1.5 - cfg.a, z);

  TripleGammaGrad out;
  out.value = special::log_gamma(cfg.c + 0.5) -
              0.5 * (kLog2Pi + std::log(kappa) + std::log(theta)) -
              special::log_beta(cfg.a, cfg.c) + u.log_u;
  out.dtheta = -0.5 / theta + u.dlogu_dz / (2.0 * kappa);
  // d/dtau via kappa = tau c/a and dz/dkappa = -z/kappa.
  out.dtau = (cfg.c / cfg.a) * (-0.5 / kappa - u.dlogu_dz * z / kappa);
  return out;
}

double log_f_prior_tau(double tau, const TripleGammaConfig& cfg) {
  cfg.validate();
  if (!(tau > 0.0)) throw std::domain_error("log_f_prior_tau: tau must be > 0");
  const double r = cfg.c / cfg.a;
  return (cfg.c - 1.0) * std::log(tau) - (cfg.c + cfg.a) * std::log1p(r * tau);
}

double log_f_prior_tau_dtau(double tau, const TripleGammaConfig& cfg) {
  cfg.validate();
  if (!(tau > 0.0)) throw std::domain_error("log_f_prior_tau_dtau: tau must be > 0");
  const double r = cfg.c / cfg.a;
  return (cfg.c - 1.0) / tau - (cfg.c + cfg.a) * r / (1.0 + r * tau);
}

double log_exp_prior_sigma2(double sigma2, const TripleGammaConfig& cfg) {
  cfg.validate();
  if (!(sigma2 >= 0.0)) throw std::domain_error("log_exp_prior_sigma2: sigma2 must be >= 0");
  return -cfg.sigma2_rate * sigma2;
}

PriorDraw sample_hierarchy(Index d, const TripleGammaConfig& cfg, bool hierarchical,
                           std::optional<double> tau_fixed, std::uint64_t seed) {
  cfg.validate();
  if (d < 1) throw std::invalid_argument("sample_hierarchy: d must be >= 1");
  if (!hierarchical && !tau_fixed)
    throw std::invalid_argument("sample_hierarchy: tau_fixed required when not hierarchical");
  if (tau_fixed && !(*tau_fixed > 0.0))
    throw std::invalid_argument("sample_hierarchy: tau_fixed must be > 0");

  RandomStream rng(seed);
  PriorDraw draw;
  draw.tau = hierarchical ? rng.f_dist(2.0 * cfg.c, 2.0 * cfg.a) : *tau_fixed;
  draw.theta.resize(d);
  draw.lambda.resize(d);
  draw.rho.resize(d);
  for (Index j = 0; j < d; ++j) {
    const double lam = rng.f_dist(2.0 * cfg.a, 2.0 * cfg.c);
    draw.lambda[j] = lam;
    draw.theta[j] = rng.gamma(0.5, 2.0 * draw.tau * lam);  // rate 1/(2 tau lambda)
    draw.rho[j] = 1.0 / (1.0 + draw.tau * lam);
  }
  return draw;
}

int model_size(const Vec& rho) {
  int k = 0;
  for (Index j = 0; j < rho.size(); ++j) {
    if (!(rho[j] >= 0.0 && rho[j] <= 1.0))
      throw std::invalid_argument("model_size: rho entries must lie in [0, 1]");
    if (rho[j] < 0.5) ++k;
  }
  return k;
}

double tau_prior_median(const TripleGammaConfig& cfg) {
  cfg.validate();
  if (cfg.a == cfg.c) return 1.0;  // F(2c, 2a) with a == c is reciprocal-symmetric
  RandomStream rng(derive_seed(0x7a75000000000000ULL, 17));
  const int n = 200001;
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i) draws[static_cast<std::size_t>(i)] = rng.f_dist(2.0 * cfg.c, 2.0 * cfg.a);
  auto mid = draws.begin() + n / 2;
  std::nth_element(draws.begin(), mid, draws.end());
  return *mid;
}

PriorStudy prior_model_size_study(Index d, const TripleGammaConfig& cfg, int outer_draws,
                                  int inner_draws, bool hierarchical,
                                  std::optional<double> tau_fixed, std::uint64_t seed) {
  cfg.validate();
  if (outer_draws < 1000)
    throw std::invalid_argument("prior_model_size_study: need at least 1000 outer draws");
  if (inner_draws < 1)
    throw std::invalid_argument("prior_model_size_study: inner draws must be >= 1");
  if (!hierarchical && !tau_fixed)
    throw std::invalid_argument("prior_model_size_study: tau_fixed required when not hierarchical");

  RandomStream rng(seed);
  PriorStudy study;
  study.pi.resize(outer_draws);
  study.k.resize(static_cast<std::size_t>(outer_draws));

  // rho_j < 1/2  <=>  tau lambda_j > 1.
  auto estimate_pi = [&](double tau) {
    int hits = 0;
    for (int i = 0; i < inner_draws; ++i)
      if (tau * rng.f_dist(2.0 * cfg.a, 2.0 * cfg.c) > 1.0) ++hits;
    return static_cast<double>(hits) / static_cast<double>(inner_draws);
  };

  double fixed_pi = 0.0;
  if (!hierarchical) fixed_pi = estimate_pi(*tau_fixed);

  for (int t = 0; t < outer_draws; ++t) {
    const double pi =
        hierarchical ? estimate_pi(rng.f_dist(2.0 * cfg.c, 2.0 * cfg.a)) : fixed_pi;
    study.pi[t] = pi;
    int k = 0;
    for (Index j = 0; j < d; ++j)
      if (rng.uniform() < pi) ++k;
    study.k[static_cast<std::size_t>(t)] = k;
  }
  return study;
}

}  // namespace flowgpr::prior
