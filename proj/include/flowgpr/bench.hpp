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

namespace flowgpr::bench {

struct BenchCase {
  Index n = 0;
  Index d = 0;
  int s = 0;  // Monte Carlo samples (iteration benchmark)
  int k = 0;  // flow layers (iteration benchmark)
  int reps = 0;
  double median_ms = 0.0;
  double iqr_ms = 0.0;
  std::vector<double> times_ms;
};

struct BenchReport {
  std::vector<BenchCase> cases;
  std::string fingerprint;
  double loglog_slope = 0.0;  // time vs n over the top half of the range
};

std::string environment_fingerprint();

/// Times the full likelihood evaluation (covariance build + factorization +
/// solves) across sample sizes; fits the log-log slope over the upper half
/// of the n range. Measurements exclude a warmup evaluation per case.
BenchReport bench_likelihood(const std::vector<Index>& n_values, Index d, int reps = 7,
                             std::uint64_t seed = 0);

/// Times one full ELBO + gradient + optimizer-step iteration.
BenchReport bench_iteration(Index n, Index d, int s, int k, int reps = 7, std::uint64_t seed = 0);

void write_report(const BenchReport& report, const std::string& path);

}  // namespace flowgpr::bench
