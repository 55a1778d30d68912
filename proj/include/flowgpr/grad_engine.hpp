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

#include <span>
#include <vector>

#include "flowgpr/autodiff.hpp"
#include "flowgpr/types.hpp"

namespace flowgpr::grad {

/// Objective evaluation failed (non-finite value or all samples rejected);
/// carries the parameter values at the failure point.
class EvaluationError : public NumericalError {
 public:
  EvaluationError(const std::string& what, Vec params)
      : NumericalError(what), params_(std::move(params)) {}
  const Vec& params() const { return params_; }

 private:
  Vec params_;
};

/// Deterministic scalar objective over a flat parameter vector. Any
/// randomness (Monte Carlo noise) must be fixed at construction so repeat
/// evaluations agree bit for bit.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual Index dim() const = 0;
  virtual ad::Var evaluate(ad::Tape& tape, std::span<const ad::Var> params) const = 0;

  /// Value only, on a scratch tape.
  double value_at(const Vec& at) const;
};

struct GradResult {
  double value = 0.0;
  Vec grad;
  std::size_t n_evals = 0;  // primitive (tape node) evaluations
};

/// Exact reverse-mode gradient of the objective.
GradResult objective_gradient(const Objective& objective, const Vec& at);

struct FdEntry {
  int coordinate = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct FdReport {
  std::vector<FdEntry> entries;
  double max_rel_error = 0.0;
  int worst_coordinate = -1;
};

/// Central-difference verification of objective_gradient on the requested
/// coordinates (all coordinates when subset is null).
FdReport fd_check(const Objective& objective, const Vec& at, double step,
                  const std::vector<int>* subset = nullptr);

}  // namespace flowgpr::grad
