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

#include "flowgpr/vi_engine.hpp"

#include <chrono>
#include <cmath>

#include "flowgpr/grad_engine.hpp"
#include "flowgpr/kernel.hpp"
#include "flowgpr/param_vector.hpp"
#include "flowgpr/random.hpp"

namespace flowgpr::vi {

namespace {

void check_xi(const Vec& xi, Index d) {
  if (xi.size() != d + 2) throw std::invalid_argument("log_joint: xi has wrong dimension");
  for (Index i = 0; i < xi.size(); ++i)
    if (!(xi[i] > 0.0)) throw std::domain_error("log_joint: xi must be strictly positive");
}

double log_joint_impl(const Vec& xi, const Vec& y, const Mat& X,
                      const prior::TripleGammaConfig& cfg, Vec* grad) {
  const Index d = X.cols();
  check_xi(xi, d);
  HyperParams p = HyperParams::from_vector(xi);

  double value = 0.0;
  if (grad != nullptr) {
    grad->resize(d + 2);
    const kernel::LogLikGrad ll = kernel::log_marginal_likelihood_grad(y, X, p);
    value = ll.value_unnorm;
    grad->head(d) = ll.dtheta;
    (*grad)[d] = ll.dtau;
    (*grad)[d + 1] = ll.dsigma2;
    for (Index j = 0; j < d; ++j) {
      const prior::TripleGammaGrad tg = prior::log_triple_gamma_grad(p.theta[j], cfg, p.tau);
      value += tg.value;
      (*grad)[j] += tg.dtheta;
      (*grad)[d] += tg.dtau;
    }
    value += prior::log_f_prior_tau(p.tau, cfg);
    (*grad)[d] += prior::log_f_prior_tau_dtau(p.tau, cfg);
    value += prior::log_exp_prior_sigma2(p.sigma2, cfg);
    (*grad)[d + 1] += -cfg.sigma2_rate;
    return value;
  }

  const Mat C = kernel::build_covariance(X, p, 0.0);
  const kernel::KernelMatrixFactor f = kernel::factorize_auto(C);
  const Vec alpha = f.solve(y);
  value = -0.5 * f.log_det - 0.5 * y.dot(alpha);
  for (Index j = 0; j < d; ++j) value += prior::log_triple_gamma(p.theta[j], cfg, p.tau);
  value += prior::log_f_prior_tau(p.tau, cfg);
  value += prior::log_exp_prior_sigma2(p.sigma2, cfg);
  return value;
}

struct AdamState {
  Vec m, v;
  long t = 0;
};

void ascend(Vec& params, const Vec& grad, const VIConfig& cfg, AdamState& state) {
  if (cfg.optimizer == VIConfig::Optimizer::sgd) {
    params += cfg.learning_rate * grad;
    return;
  }
  ++state.t;
  state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * grad;
  state.v = cfg.adam_beta2 * state.v.array().matrix() +
            (1.0 - cfg.adam_beta2) * grad.array().square().matrix();
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
  params.array() += cfg.learning_rate * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + cfg.adam_eps);
}

}  // namespace

GprJointTarget::GprJointTarget(Mat X, Vec y, prior::TripleGammaConfig cfg)
    : x_(std::move(X)), y_(std::move(y)), cfg_(cfg) {
  cfg_.validate();
  if (y_.size() != x_.rows())
    throw std::invalid_argument("GprJointTarget: y and X not conformable");
}

double GprJointTarget::eval(const Vec& xi, Vec* grad) const {
  return log_joint_impl(xi, y_, x_, cfg_, grad);
}

ad::Var ElboObjective::evaluate(ad::Tape& tape, std::span<const ad::Var> params) const {
  rejected_ = 0;
  const flows::FlowStackT<ad::Var> stack = grad::unpack<ad::Var>(layout_, params.data());
  const Index d = layout_.dim;
  ad::Var acc(0.0);
  int ok = 0;
  Vec xi_values(d), target_grad(d);
  for (Index s = 0; s < noise_.rows(); ++s) {
    VecX<ad::Var> u0(d);
    for (Index i = 0; i < d; ++i) u0[i] = ad::Var(noise_(s, i));  // fixed noise
    const flows::StackResult<ad::Var> r = flows::stack_forward(u0, stack);
    for (Index i = 0; i < d; ++i) xi_values[i] = r.xi[i].value();
    double value;
    try {
      value = target_.eval(xi_values, &target_grad);
    } catch (const FactorizationError&) {
      ++rejected_;
      continue;
    } catch (const NumericalError&) {
      ++rejected_;
      continue;
    }
    if (!std::isfinite(value)) {
      ++rejected_;
      continue;
    }
    const ad::Var node = ad::custom_node(
        tape, std::span<const ad::Var>(r.xi.data(), static_cast<std::size_t>(d)), value,
        std::span<const double>(target_grad.data(), static_cast<std::size_t>(d)));
    acc += node + r.log_det;
    ++ok;
  }
  if (ok == 0) {
    Vec at(static_cast<Index>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i)
      at[static_cast<Index>(i)] = params[i].value();
    throw grad::EvaluationError("elbo: all Monte Carlo draws rejected", at);
  }
  return acc / static_cast<double>(ok);
}

double log_joint(const Vec& xi, const Vec& y, const Mat& X,
                 const prior::TripleGammaConfig& cfg) {
  return log_joint_impl(xi, y, X, cfg, nullptr);
}

double elbo_mc(const flows::FlowStack& stack, const LogDensityTarget& target, const Mat& noise) {
  if (noise.cols() != stack.dim) throw std::invalid_argument("elbo_mc: noise dimension mismatch");
  double acc = 0.0;
  int ok = 0;
  for (Index s = 0; s < noise.rows(); ++s) {
    const flows::StackResult<double> r = flows::stack_forward<double>(noise.row(s).transpose(), stack);
    double value;
    try {
      value = target.eval(r.xi, nullptr);
    } catch (const FactorizationError&) {
      continue;
    } catch (const NumericalError&) {
      continue;
    }
    if (!std::isfinite(value)) continue;
    acc += value + r.log_det;
    ++ok;
  }
  if (ok == 0) throw NumericalError("elbo_mc: all Monte Carlo draws rejected");
  return acc / static_cast<double>(ok);
}

FitOutput fit_target(const LogDensityTarget& target, const VIConfig& cfg) {
  cfg.validate();
  const Index d = target.dim();
  RandomStream init_rng(derive_seed(cfg.seed, 1));
  flows::FlowStack stack0 = flows::make_stack(d, cfg.n_layers, cfg.sylvester_width,
                                              cfg.affine_base, cfg.softplus_beta, init_rng);
  const grad::StackLayout layout = grad::layout_of(stack0);
  Vec params = grad::pack(stack0);

  AdamState adam;
  adam.m = Vec::Zero(layout.total);
  adam.v = Vec::Zero(layout.total);

  RandomStream noise_rng(derive_seed(cfg.seed, 2));
  ElboTrace trace;
  trace.elbo.reserve(static_cast<std::size_t>(cfg.n_iterations));
  double window_sum = 0.0;
  int consecutive_failures = 0;

  for (int iter = 0; iter < cfg.n_iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    Mat noise(cfg.n_mc_samples, d);
    for (Index s = 0; s < noise.rows(); ++s)
      for (Index i = 0; i < d; ++i) noise(s, i) = noise_rng.normal();

    ElboObjective objective(target, layout, noise);
    grad::GradResult g;
    try {
      g = grad::objective_gradient(objective, params);
    } catch (const grad::EvaluationError&) {
      ++consecutive_failures;
      if (consecutive_failures > 50)
        throw FitError("fit: more than 50 consecutive rejected iterations", std::move(trace));
      continue;
    }
    consecutive_failures = 0;
    trace.rejected_samples += objective.rejected();

    const double gnorm = g.grad.norm();
    if (gnorm > cfg.grad_clip) g.grad *= cfg.grad_clip / gnorm;
    ascend(params, g.grad, cfg, adam);

    trace.elbo.push_back(g.value);
    window_sum += g.value;
    const int n = static_cast<int>(trace.elbo.size());
    if (n > cfg.elbo_window) window_sum -= trace.elbo[static_cast<std::size_t>(n - cfg.elbo_window - 1)];
    const double smoothed = window_sum / std::min(n, cfg.elbo_window);
    trace.smoothed.push_back(smoothed);
    if (!trace.plateau && n >= 2 * cfg.elbo_window) {
      const double prev = trace.smoothed[static_cast<std::size_t>(n - 1 - cfg.elbo_window)];
      if (std::abs(smoothed - prev) < 1e-4 * std::max(1.0, std::abs(smoothed))) {
        trace.plateau = true;
        trace.plateau_iteration = n;
      }
    }
    const auto t1 = std::chrono::steady_clock::now();
    trace.wall_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }

  FitOutput out;
  out.stack = grad::unpack<double>(layout, params.data());
  out.trace = std::move(trace);
  return out;
}

FitOutput fit(const Mat& X, const Vec& y, const prior::TripleGammaConfig& prior_cfg,
              const VIConfig& vi_cfg) {
  if (X.rows() < 2) throw std::invalid_argument("fit: need at least two observations");
  if (X.cols() < 1) throw std::invalid_argument("fit: need at least one covariate");
  const GprJointTarget target(X, y, prior_cfg);
  return fit_target(target, vi_cfg);
}

}  // namespace flowgpr::vi
