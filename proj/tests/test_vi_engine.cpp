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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowgpr/data_io.hpp"
#include "flowgpr/kernel.hpp"
#include "flowgpr/random.hpp"
#include "flowgpr/special_functions.hpp"
#include "flowgpr/vi_engine.hpp"
#include "support/oracles.hpp"

using namespace flowgpr;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Gaussian base differential entropy per coordinate; converts the Monte Carlo
// objective E[log p + log J] into the KL-form lower bound.
double base_entropy(Index dim) { return 0.5 * static_cast<double>(dim) * (kLog2Pi + 1.0); }

/// Product density of softplus(N(0,1)) per coordinate; normalized, so the
/// optimal lower bound is exactly zero.
class SoftplusGaussianTarget : public vi::LogDensityTarget {
 public:
  explicit SoftplusGaussianTarget(Index dim) : dim_(dim) {}
  Index dim() const override { return dim_; }
  double eval(const Vec& xi, Vec* grad) const override {
    if (grad != nullptr) grad->resize(dim_);
    double value = 0.0;
    for (Index i = 0; i < dim_; ++i) {
      if (!(xi[i] > 0.0)) throw std::domain_error("xi must be positive");
      const double u = special::softplus_inv(xi[i]);
      const double sig = special::sigmoid(u);
      value += -0.5 * (kLog2Pi + u * u) - std::log(sig);
      if (grad != nullptr) (*grad)[i] = (-u - (1.0 - sig)) / sig;
    }
    return value;
  }

 private:
  Index dim_;
};

/// Two-dimensional GPR joint over (tau, sigma2) with the weight vector held
/// fixed; used to compare the bound against brute-force evidence.
class FixedThetaTarget : public vi::LogDensityTarget {
 public:
  FixedThetaTarget(Mat X, Vec y, double theta0, prior::TripleGammaConfig cfg)
      : x_(std::move(X)), y_(std::move(y)), theta0_(theta0), cfg_(cfg) {}
  Index dim() const override { return 2; }
  double eval(const Vec& v, Vec* grad) const override {
    HyperParams p;
    p.theta = Vec::Constant(1, theta0_);
    p.tau = v[0];
    p.sigma2 = v[1];
    if (!(p.tau > 0.0) || !(p.sigma2 > 0.0)) throw std::domain_error("parameters must be positive");
    if (grad == nullptr) {
      const Mat C = kernel::build_covariance(x_, p, 0.0);
      const kernel::KernelMatrixFactor f = kernel::factorize_auto(C);
      const Vec alpha = f.solve(y_);
      return -0.5 * f.log_det - 0.5 * y_.dot(alpha) +
             prior::log_triple_gamma(theta0_, cfg_, p.tau) + prior::log_f_prior_tau(p.tau, cfg_) +
             prior::log_exp_prior_sigma2(p.sigma2, cfg_);
    }
    const kernel::LogLikGrad ll = kernel::log_marginal_likelihood_grad(y_, x_, p);
    const prior::TripleGammaGrad tg = prior::log_triple_gamma_grad(theta0_, cfg_, p.tau);
    grad->resize(2);
    (*grad)[0] = ll.dtau + tg.dtau + prior::log_f_prior_tau_dtau(p.tau, cfg_);
    (*grad)[1] = ll.dsigma2 - cfg_.sigma2_rate;
    return ll.value_unnorm + tg.value + prior::log_f_prior_tau(p.tau, cfg_) +
           prior::log_exp_prior_sigma2(p.sigma2, cfg_);
  }

 private:
  Mat x_;
  Vec y_;
  double theta0_;
  prior::TripleGammaConfig cfg_;
};

/// Throws for xi[0] above a threshold; used to exercise the rejection policy.
class FlakyTarget : public vi::LogDensityTarget {
 public:
  FlakyTarget(Index dim, double threshold) : dim_(dim), threshold_(threshold) {}
  Index dim() const override { return dim_; }
  double eval(const Vec& xi, Vec* grad) const override {
    if (xi[0] > threshold_) throw NumericalError("synthetic failure");
    if (grad != nullptr) {
      grad->resize(dim_);
      for (Index i = 0; i < dim_; ++i) (*grad)[i] = -1.0;
    }
    return -xi.sum();
  }

 private:
  Index dim_;
  double threshold_;
};

data::Simulated small_sim(Index d, Index n, double sparsity, std::uint64_t seed) {
  data::SimConfig cfg;
  cfg.d = d;
  cfg.n_train = n;
  cfg.n_test = 20;
  cfg.sparsity = sparsity;
  cfg.rho_corr = 0.5;
  cfg.theta_scale_is_rate = true;
  cfg.seed = seed;
  return data::simulate(cfg);
}

}  // namespace

TEST_CASE("log_joint decomposes into its prior and likelihood terms") {
  prior::TripleGammaConfig cfg{0.5, 0.5, 10.0};
  Mat X(1, 1);
  X << 0.5;
  Vec y(1);
  y << 0.0;
  Vec xi(3);
  xi << 1.0, 1.0, 0.1;  // theta = 1, tau = 1, sigma2 = 0.1

  const double joint = vi::log_joint(xi, y, X, cfg);
  // Scalar likelihood: C = 1/tau + sigma2 = 1.1 (y = 0 kills the quadratic
  // term up to the jitter-level perturbation).
  const double lik = -0.5 * std::log(1.1);
  const double assembled = lik + prior::log_triple_gamma(1.0, cfg, 1.0) +
                           prior::log_f_prior_tau(1.0, cfg) +
                           prior::log_exp_prior_sigma2(0.1, cfg);
  CHECK(joint == doctest::Approx(assembled).epsilon(1e-7));
  CHECK(prior::log_f_prior_tau(1.0, cfg) == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(prior::log_exp_prior_sigma2(0.1, cfg) == doctest::Approx(-1.0).epsilon(1e-14));

  // Doubling the exponential rate changes the joint by exactly -rate' + rate
  // times sigma2.
  prior::TripleGammaConfig cfg2 = cfg;
  cfg2.sigma2_rate = 20.0;
  CHECK(vi::log_joint(xi, y, X, cfg2) - joint == doctest::Approx(-1.0).epsilon(1e-9));

  CHECK_THROWS_AS(vi::log_joint(Vec::Zero(3), y, X, cfg), std::domain_error);
}

TEST_CASE("elbo_mc definitional case: S=1, softplus-only stack") {
  prior::TripleGammaConfig cfg{0.5, 0.5, 10.0};
  const data::Simulated sim = small_sim(1, 6, 0.0, 3);
  const vi::GprJointTarget target(sim.train.X, sim.train.y, cfg);

  flows::FlowStack stack;
  stack.dim = 3;
  stack.softplus_beta = 1.0;

  Mat noise(1, 3);
  noise << 0.3, -0.2, 0.8;
  const double got = vi::elbo_mc(stack, target, noise);

  Vec xi(3);
  double log_det = 0.0;
  for (Index i = 0; i < 3; ++i) {
    xi[i] = special::softplus(noise(0, i));
    log_det += special::log_sigmoid(noise(0, i));
  }
  const double want = vi::log_joint(xi, sim.train.y, sim.train.X, cfg) + log_det;
  CHECK(got == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("elbo_mc deterministic given the noise matrix") {
  prior::TripleGammaConfig cfg{0.5, 0.5, 10.0};
  const data::Simulated sim = small_sim(2, 10, 0.5, 4);
  const vi::GprJointTarget target(sim.train.X, sim.train.y, cfg);
  RandomStream rng(5);
  const flows::FlowStack stack = flows::make_stack(4, 2, 0, true, 1.0, rng);
  Mat noise(4, 4);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) noise(i, j) = rng.normal();
  CHECK(vi::elbo_mc(stack, target, noise) == vi::elbo_mc(stack, target, noise));
}

TEST_CASE("KL sanity: known normalized target is matched to bound zero") {
  const SoftplusGaussianTarget target(1);
  vi::VIConfig cfg;
  cfg.n_layers = 0;
  cfg.affine_base = true;
  cfg.n_mc_samples = 32;
  cfg.n_iterations = 1200;
  cfg.learning_rate = 0.02;
  cfg.seed = 11;
  const vi::FitOutput out = vi::fit_target(target, cfg);

  RandomStream rng(12);
  Mat noise(40000, 1);
  for (Index i = 0; i < noise.rows(); ++i) noise(i, 0) = rng.normal();
  const double bound = vi::elbo_mc(out.stack, target, noise) + base_entropy(1);
  CHECK(std::abs(bound) < 1e-2);
}

TEST_CASE("lower bound never exceeds brute-force evidence") {
  RandomStream rng(13);
  const Index n = 12;
  Mat X(n, 1);
  for (Index i = 0; i < n; ++i) X(i, 0) = rng.normal();
  Vec y(n);
  for (Index i = 0; i < n; ++i) y[i] = 0.7 * std::sin(1.5 * X(i, 0)) + 0.4 * rng.normal();
  prior::TripleGammaConfig cfg{0.5, 0.5, 10.0};
  const FixedThetaTarget target(X, y, 1.2, cfg);

  // Evidence by nested adaptive quadrature over log tau, log sigma2.
  const auto inner = [&](double a) {
    return oracles::adaptive_simpson(
        [&](double b) {
          Vec v(2);
          v << std::exp(a), std::exp(b);
          return std::exp(target.eval(v, nullptr) + a + b);
        },
        -9.0, 4.0, 1e-11);
  };
  const double evidence = oracles::adaptive_simpson(inner, -9.0, 5.0, 1e-9);
  const double log_evidence = std::log(evidence);

  vi::VIConfig vcfg;
  vcfg.n_layers = 2;
  vcfg.n_mc_samples = 16;
  vcfg.n_iterations = 800;
  vcfg.learning_rate = 0.01;
  vcfg.seed = 14;
  const vi::FitOutput out = vi::fit_target(target, vcfg);

  // 200 fresh noise sets.
  RandomStream nrng(15);
  std::vector<double> elbos;
  for (int rep = 0; rep < 200; ++rep) {
    Mat noise(8, 2);
    for (Index i = 0; i < noise.rows(); ++i)
      for (Index j = 0; j < 2; ++j) noise(i, j) = nrng.normal();
    elbos.push_back(vi::elbo_mc(out.stack, target, noise) + base_entropy(2));
  }
  double mean = 0.0;
  for (double e : elbos) mean += e;
  mean /= static_cast<double>(elbos.size());
  double var = 0.0;
  for (double e : elbos) var += (e - mean) * (e - mean);
  var /= static_cast<double>(elbos.size() - 1);
  const double se = std::sqrt(var / static_cast<double>(elbos.size()));

  CHECK(mean <= log_evidence + 3.0 * se);
  // And the fit is not vacuous: the bound comes out within a few nats.
  CHECK(mean > log_evidence - 3.0);
}

TEST_CASE("a tiny ascent step along the gradient does not decrease the elbo") {
  prior::TripleGammaConfig cfg{0.5, 0.5, 10.0};
  const data::Simulated sim = small_sim(2, 15, 0.5, 16);
  const vi::GprJointTarget target(sim.train.X, sim.train.y, cfg);
  RandomStream rng(17);
  flows::FlowStack stack = flows::make_stack(4, 2, 0, true, 1.0, rng);
  const grad::StackLayout layout = grad::layout_of(stack);
  Vec params = grad::pack(stack);
  for (Index i = 0; i < params.size(); ++i) params[i] += 0.05 * rng.normal();

  Mat noise(6, 4);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 4; ++j) noise(i, j) = rng.normal();
  const vi::ElboObjective objective(target, layout, noise);
  const grad::GradResult g = grad::objective_gradient(objective, params);
  const double before = g.value;
  const double after = objective.value_at(params + 1e-6 * g.grad);
  CHECK(after >= before - 1e-10);
}

TEST_CASE("fit is deterministic seed for seed") {
  prior::TripleGammaConfig cfg{0.5, 0.5, 10.0};
  const data::Simulated sim = small_sim(2, 12, 0.5, 18);
  vi::VIConfig vcfg;
  vcfg.n_layers = 1;
  vcfg.n_mc_samples = 3;
  vcfg.n_iterations = 25;
  vcfg.seed = 19;
  const vi::FitOutput a = vi::fit(sim.train.X, sim.train.y, cfg, vcfg);
  const vi::FitOutput b = vi::fit(sim.train.X, sim.train.y, cfg, vcfg);
  REQUIRE(a.trace.elbo.size() == b.trace.elbo.size());
  for (std::size_t i = 0; i < a.trace.elbo.size(); ++i)
    CHECK(a.trace.elbo[i] == b.trace.elbo[i]);
  CHECK((grad::pack(a.stack) - grad::pack(b.stack)).cwiseAbs().maxCoeff() == 0.0);

  vi::VIConfig other = vcfg;
  other.seed = 20;
  const vi::FitOutput c = vi::fit(sim.train.X, sim.train.y, cfg, other);
  CHECK(a.trace.elbo[0] != c.trace.elbo[0]);
}

TEST_CASE("smoothed elbo trend on a small instance") {
  prior::TripleGammaConfig cfg{0.1, 0.1, 10.0};
  const data::Simulated sim = small_sim(4, 50, 0.5, 21);
  vi::VIConfig vcfg;
  vcfg.n_layers = 4;
  vcfg.n_mc_samples = 6;
  vcfg.n_iterations = 260;
  vcfg.seed = 22;
  const vi::FitOutput out = vi::fit(sim.train.X, sim.train.y, cfg, vcfg);
  REQUIRE(out.trace.smoothed.size() == 260);
  CHECK(out.trace.smoothed.back() >= out.trace.smoothed[49] - 1.0);
}

TEST_CASE("rejected draws reduce the sample average and are counted") {
  const FlakyTarget target(2, special::softplus(1.0));  // xi[0] > softplus(1) fails
  RandomStream rng(23);
  flows::FlowStack stack;
  stack.dim = 2;
  stack.softplus_beta = 1.0;
  const grad::StackLayout layout = grad::layout_of(stack);

  Mat noise(3, 2);
  noise << 0.0, 0.0, 2.0, 0.0, -1.0, 0.5;  // middle draw fails
  const vi::ElboObjective objective(target, layout, noise);
  ad::Tape tape;
  std::vector<ad::Var> params;  // layout is empty for a softplus-only stack
  const ad::Var v = objective.evaluate(tape, params);
  CHECK(objective.rejected() == 1);

  double expect = 0.0;
  int used = 0;
  for (Index s : {Index(0), Index(2)}) {
    Vec xi(2);
    double ld = 0.0;
    for (Index i = 0; i < 2; ++i) {
      xi[i] = special::softplus(noise(s, i));
      ld += special::log_sigmoid(noise(s, i));
    }
    expect += -xi.sum() + ld;
    ++used;
  }
  CHECK(v.value() == doctest::Approx(expect / used).epsilon(1e-14));
}

TEST_CASE("all draws failing raises an evaluation error, persistent failure aborts fit") {
  const FlakyTarget target(2, 0.0);  // every draw fails (softplus > 0)
  RandomStream rng(24);
  flows::FlowStack stack;
  stack.dim = 2;
  const grad::StackLayout layout = grad::layout_of(stack);
  Mat noise(2, 2);
  noise << 0.1, 0.2, -0.3, 0.4;
  const vi::ElboObjective objective(target, layout, noise);
  CHECK_THROWS_AS(grad::objective_gradient(objective, Vec::Zero(0)), grad::EvaluationError);

  vi::VIConfig vcfg;
  vcfg.n_layers = 0;
  vcfg.affine_base = true;
  vcfg.n_mc_samples = 2;
  vcfg.n_iterations = 100;
  vcfg.seed = 25;
  CHECK_THROWS_AS(vi::fit_target(target, vcfg), NumericalError);
}
