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
#include <string>
#include <vector>

#include "flowgpr/data_io.hpp"
#include "flowgpr/vi_engine.hpp"

namespace flowgpr::model {

enum class Method : std::uint8_t { nf = 0, mf = 1, ml = 2 };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

/// Result of a model fit. Variational fits carry the flow stack, the
/// maximum-likelihood fit carries a point estimate; the training data and
/// standardization are retained because GP prediction is data-dependent.
struct FitResult {
  Method method = Method::nf;
  flows::FlowStack stack;          // nf / mf only
  HyperParams point;               // ml only
  std::vector<double> trace;       // ELBO or objective path
  std::vector<double> trace_smoothed;
  prior::TripleGammaConfig prior_cfg;
  std::uint64_t seed = 0;
  Mat x_train;
  Vec y_train;
  data::Standardization standardization;
  long rejected_samples = 0;
  bool plateau = false;        // smoothed-ELBO plateau was detected
  int plateau_iteration = -1;  // first iteration of the plateau, if any
};

struct MlConfig {
  int n_restarts = 10;
  int n_iterations = 400;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

FitResult fit_nf(const data::Dataset& train, const prior::TripleGammaConfig& prior_cfg,
                 const vi::VIConfig& vi_cfg);

/// Mean-field baseline: the same machinery restricted to a single
/// diagonal-affine layer (factorized family).
FitResult fit_mf(const data::Dataset& train, const prior::TripleGammaConfig& prior_cfg,
                 const vi::VIConfig& vi_cfg);

/// Type-II maximum likelihood with restarts; optimizes the log marginal
/// likelihood in softplus-unconstrained space.
FitResult fit_ml(const data::Dataset& train, const MlConfig& cfg);

struct PosteriorDraws {
  Mat xi;     // n_draws x D, strictly positive
  Vec log_q;  // variational log density per draw
};

PosteriorDraws sample_posterior(const FitResult& fit, int n_draws, std::uint64_t seed);

/// Average log predictive density over the test points: the posterior-draw
/// mixture for variational fits, the plug-in predictive for ml.
double lpds(const FitResult& fit, const data::Dataset& test, int n_draws, std::uint64_t seed,
            Vec* per_point = nullptr);

struct InclusionRow {
  Index covariate = 0;    // original column index (0-based)
  double median = 0.0;
  double lo90 = 0.0;      // central 90% interval
  double hi90 = 0.0;
  double shrink_frac = 0.0;  // fraction of draws below the reference quantile
};

/// Per-covariate posterior summary sorted by descending median (ties by
/// covariate index). shrink_frac uses the median of Gamma(1/2, rate 1/2) as
/// the reference: the conditional prior at the shrinkage-factor boundary.
std::vector<InclusionRow> inclusion_summary(const PosteriorDraws& draws,
                                            const prior::TripleGammaConfig& prior_cfg);

// --- checkpointing ----------------------------------------------------------

std::vector<std::uint8_t> save_checkpoint(const FitResult& fit);
FitResult load_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint_file(const FitResult& fit, const std::string& path);
FitResult load_checkpoint_file(const std::string& path);

}  // namespace flowgpr::model
