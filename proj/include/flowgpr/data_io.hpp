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

#include <string>
#include <vector>

#include "flowgpr/types.hpp"

namespace flowgpr::data {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyDesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Column transform metadata; enough to map raw rows into model space and to
/// return predictions in original response units.
struct Standardization {
  std::vector<Index> kept_columns;      // indices into the original design
  Vec col_mean;                         // per kept column (0 for binary)
  Vec col_scale;                        // per kept column (1 for binary)
  std::vector<std::uint8_t> binary_mask;  // per kept column
  double response_center = 0.0;
  bool applied = false;
};

struct Dataset {
  Mat X;
  Vec y;
  std::vector<std::string> feature_names;
  Standardization standardization;

  Index n() const { return X.rows(); }
  Index d() const { return X.cols(); }
};

struct SimConfig {
  Index d = 10;
  Index n_train = 100;
  Index n_test = 300;
  double sparsity = 0.5;     // fraction of weights zeroed, floor(s * d) of them
  double rho_corr = 0.5;     // equicorrelation of the covariates
  double tau_true = 2.0;
  double noise_var = 0.1;
  double theta_shape = 6.0;
  double theta_scale = 24.0;
  bool theta_scale_is_rate = false;  // interpret theta_scale as a rate instead
  std::uint64_t seed = 0;

  void validate() const {
    if (d < 1) throw std::invalid_argument("SimConfig: d must be >= 1");
    if (n_train < 1 || n_test < 0) throw std::invalid_argument("SimConfig: bad sample sizes");
    if (!(sparsity >= 0.0 && sparsity < 1.0 + 1e-12))
      throw std::invalid_argument("SimConfig: sparsity must lie in [0, 1]");
    if (!(rho_corr >= 0.0 && rho_corr < 1.0))
      throw std::invalid_argument("SimConfig: rho_corr must lie in [0, 1)");
    if (!(tau_true > 0.0) || !(noise_var > 0.0))
      throw std::invalid_argument("SimConfig: tau_true and noise_var must be > 0");
    if (!(theta_shape > 0.0) || !(theta_scale > 0.0))
      throw std::invalid_argument("SimConfig: theta prior parameters must be > 0");
  }
};

struct SimTruth {
  Vec theta;
  double tau = 0.0;
  double noise_var = 0.0;
};

struct Simulated {
  Dataset train;
  Dataset test;
  SimTruth truth;
};

/// Equicorrelated Gaussian covariates, sparse gamma-distributed weights and a
/// single joint GP response draw over train and test rows.
Simulated simulate(const SimConfig& cfg);

/// Parse a delimited numeric table with a header row. Binary columns
/// (exactly two distinct values) are flagged in the returned metadata.
Dataset load_table(const std::string& path, const std::string& response_column,
                   char delimiter = ',');

/// Drop zero-variance columns, standardize non-binary columns, center the
/// response, and record the transform for later inversion.
Dataset preprocess(const Dataset& raw);

/// Apply an existing transform (from a training fold) to raw data.
Dataset apply_standardization(const Dataset& raw, const Standardization& s);

struct Fold {
  Dataset train;
  Dataset test;
  std::vector<Index> test_indices;
};

/// Disjoint covering folds with sizes differing by at most one;
/// standardization is refit on each training fold.
std::vector<Fold> kfold(const Dataset& raw, int k, std::uint64_t seed);

// --- delimited text helpers -------------------------------------------------

/// Shortest round-trip decimal formatting.
std::string format_double(double v);

void write_table(const std::string& path, const Mat& X, const Vec& y,
                 const std::vector<std::string>& feature_names,
                 const std::string& response_name = "y", char delimiter = ',');

void write_columns(const std::string& path, const std::vector<std::string>& headers,
                   const std::vector<Vec>& columns, char delimiter = ',');

}  // namespace flowgpr::data
