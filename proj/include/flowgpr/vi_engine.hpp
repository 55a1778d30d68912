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
#include <vector>

#include "flowgpr/flows.hpp"
#include "flowgpr/grad_engine.hpp"
#include "flowgpr/param_vector.hpp"
#include "flowgpr/shrinkage_prior.hpp"
#include "flowgpr/types.hpp"

namespace flowgpr::vi {

struct VIConfig {
  int n_layers = 10;       // sylvester layers
  int n_mc_samples = 10;   // S
  int n_iterations = 3000; // M
  double learning_rate = 5e-3;
  enum class Optimizer { adam, sgd };
  Optimizer optimizer = Optimizer::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1e3;  // global norm
  std::uint64_t seed = 0;
  int elbo_window = 50;
  Index sylvester_width = 0;  // 0 -> min(dim, 8)
  double softplus_beta = 1.0;
  bool affine_base = true;

  void validate() const {
    if (n_layers < 0) throw std::invalid_argument("VIConfig: n_layers must be >= 0");
    if (n_mc_samples < 1) throw std::invalid_argument("VIConfig: n_mc_samples must be >= 1");
    if (n_iterations < 1) throw std::invalid_argument("VIConfig: n_iterations must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("VIConfig: learning_rate must be > 0");
    if (elbo_window < 1) throw std::invalid_argument("VIConfig: elbo_window must be >= 1");
  }
};

struct ElboTrace {
  std::vector<double> elbo;      // Monte Carlo ELBO per completed iteration
  std::vector<double> smoothed;  // rolling mean over elbo_window
  std::vector<double> wall_ms;   // per-iteration wall clock
  long rejected_samples = 0;     // draws dropped due to evaluation failures
  bool plateau = false;          // smoothed relative change < 1e-4 over window
  int plateau_iteration = -1;
};

/// Optimization aborted (persistent evaluation failures); carries the trace
/// accumulated up to the failure.
class FitError : public NumericalError {
 public:
  FitError(const std::string& what, ElboTrace trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const ElboTrace& trace() const { return trace_; }

 private:
  ElboTrace trace_;
};

/// Unnormalized log density over a strictly positive parameter vector,
/// with an optional gradient. Evaluations must be pure.
class LogDensityTarget {
 public:
  virtual ~LogDensityTarget() = default;
  virtual Index dim() const = 0;
  virtual double eval(const Vec& xi, Vec* grad) const = 0;
};

/// The GPR joint: unnormalized log marginal likelihood plus the shrinkage
/// prior terms on (theta, tau) and the exponential prior on sigma2.
class GprJointTarget : public LogDensityTarget {
 public:
  GprJointTarget(Mat X, Vec y, prior::TripleGammaConfig cfg);
  Index dim() const override { return x_.cols() + 2; }
  double eval(const Vec& xi, Vec* grad) const override;

  const Mat& x() const { return x_; }
  const Vec& y() const { return y_; }
  const prior::TripleGammaConfig& prior_config() const { return cfg_; }

 private:
  Mat x_;
  Vec y_;
  prior::TripleGammaConfig cfg_;
};

/// Unnormalized log posterior at xi = (theta_1..theta_d, tau, sigma2).
double log_joint(const Vec& xi, const Vec& y, const Mat& X,
                 const prior::TripleGammaConfig& cfg);

/// Monte Carlo ELBO for the given base draws (rows of noise). Deterministic
/// given the noise matrix; draws whose evaluation fails are dropped.
double elbo_mc(const flows::FlowStack& stack, const LogDensityTarget& target, const Mat& noise);

/// The MC-ELBO as a differentiable objective over the flat flow parameters,
/// for a fixed noise matrix (reparameterization: the base draws are held
/// constant, gradients flow through the transform only). Draws whose target
/// evaluation fails are dropped and the sample average renormalized.
class ElboObjective : public grad::Objective {
 public:
  ElboObjective(const LogDensityTarget& target, const grad::StackLayout& layout,
                const Mat& noise)
      : target_(target), layout_(layout), noise_(noise) {}

  Index dim() const override { return layout_.total; }
  ad::Var evaluate(ad::Tape& tape, std::span<const ad::Var> params) const override;

  long rejected() const { return rejected_; }

 private:
  const LogDensityTarget& target_;
  const grad::StackLayout& layout_;
  const Mat& noise_;
  mutable long rejected_ = 0;
};

struct FitOutput {
  flows::FlowStack stack;
  ElboTrace trace;
};

/// Full gradient-ascent loop over a generic target.
FitOutput fit_target(const LogDensityTarget& target, const VIConfig& cfg);

/// GPR convenience wrapper.
FitOutput fit(const Mat& X, const Vec& y, const prior::TripleGammaConfig& prior_cfg,
              const VIConfig& vi_cfg);

}  // namespace flowgpr::vi
