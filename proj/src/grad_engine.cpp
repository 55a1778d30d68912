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

#include "flowgpr/grad_engine.hpp"

#include <cmath>

namespace flowgpr::grad {

double Objective::value_at(const Vec& at) const {
  ad::Tape tape;
  std::vector<ad::Var> params;
  params.reserve(static_cast<std::size_t>(at.size()));
  for (Index i = 0; i < at.size(); ++i) params.emplace_back(&tape, at[i]);
  return evaluate(tape, params).value();
}

GradResult objective_gradient(const Objective& objective, const Vec& at) {
  if (at.size() != objective.dim())
    throw std::invalid_argument("objective_gradient: parameter dimension mismatch");
  ad::Tape tape;
  std::vector<ad::Var> params;
  params.reserve(static_cast<std::size_t>(at.size()));
  for (Index i = 0; i < at.size(); ++i) params.emplace_back(&tape, at[i]);

  const ad::Var out = objective.evaluate(tape, params);
  if (!std::isfinite(out.value()))
    throw EvaluationError("objective_gradient: non-finite objective value", at);

  std::vector<double> adjoints;
  tape.backward(out.index(), adjoints);

  GradResult result;
  result.value = out.value();
  result.grad.resize(at.size());
  for (Index i = 0; i < at.size(); ++i)
    result.grad[i] = out.index() >= 0 ? adjoints[static_cast<std::size_t>(params[static_cast<std::size_t>(i)].index())] : 0.0;
  result.n_evals = tape.size();
  if (!result.grad.allFinite())
    throw EvaluationError("objective_gradient: non-finite gradient", at);
  return result;
}

FdReport fd_check(const Objective& objective, const Vec& at, double step,
                  const std::vector<int>* subset) {
  if (!(step > 0.0)) throw std::invalid_argument("fd_check: step must be > 0");
  const GradResult g = objective_gradient(objective, at);

  std::vector<int> coords;
  if (subset != nullptr) {
    coords = *subset;
  } else {
    coords.resize(static_cast<std::size_t>(at.size()));
    for (Index i = 0; i < at.size(); ++i) coords[static_cast<std::size_t>(i)] = static_cast<int>(i);
  }

  FdReport report;
  report.entries.reserve(coords.size());
  for (int c : coords) {
    Vec lo = at, hi = at;
    lo[c] -= step;
    hi[c] += step;
    const double numeric = (objective.value_at(hi) - objective.value_at(lo)) / (2.0 * step);
    const double analytic = g.grad[c];
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-12});
    FdEntry e;
    e.coordinate = c;
    e.analytic = analytic;
    e.numeric = numeric;
    e.rel_error = std::abs(numeric - analytic) / denom;
    if (e.rel_error > report.max_rel_error) {
      report.max_rel_error = e.rel_error;
      report.worst_coordinate = c;
    }
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace flowgpr::grad
