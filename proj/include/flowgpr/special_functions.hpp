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

#include <cmath>
#include <vector>

#include "flowgpr/types.hpp"

namespace flowgpr::special {

/// log Gamma(x) for x > 0.
double log_gamma(double x);

/// log B(a, c) for a, c > 0.
double log_beta(double a, double c);

/// Quadrature rule over the positive half line (abscissae in the original
/// integration variable). Immutable after construction.
struct QuadratureRule {
  std::vector<double> nodes;    // strictly increasing, positive
  std::vector<double> weights;  // positive
  int order = 0;
};

/// log U(a, b, z) for the confluent hypergeometric function of the second
/// kind, a > 0, z > 0, via its integral representation
///   U(a,b,z) = 1/Gamma(a) * int_0^inf e^{-z t} t^{a-1} (1+t)^{b-a-1} dt.
/// The integral is evaluated on a log-axis grid with an analytic left-tail
/// correction; node count starts at 128 and doubles until two successive
/// orders agree to 1e-8 relative (cap 1024).
double log_hyp_u(double a, double b, double z);

/// Same integral at a fixed node count (no adaptation). Exposed so
/// self-consistency between order m and 2m can be checked directly.
double log_hyp_u_order(double a, double b, double z, int order);

struct HypUResult {
  double log_u = 0.0;
  double dlogu_dz = 0.0;
};

/// log U and its z-derivative, both from the same grid.
HypUResult log_hyp_u_grad(double a, double b, double z);

/// The quadrature rule underlying log_hyp_u_order, mapped back to the
/// t variable of the integral representation.
QuadratureRule hyp_u_rule(double a, double b, double z, int order);

// ---------------------------------------------------------------------------
// Scalar helpers shared by the density code and the flow layers. Templated on
// the scalar so the same expressions run in plain double and in the autodiff
// type.
// ---------------------------------------------------------------------------

template <typename T>
T log_sigmoid(const T& x) {
  using std::exp;
  using std::log1p;
  if (x >= T(0.0)) return -log1p(exp(-x));
  return x - log1p(exp(x));
}

template <typename T>
T sigmoid(const T& x) {
  using std::exp;
  if (x >= T(0.0)) return T(1.0) / (T(1.0) + exp(-x));
  const T e = exp(x);
  return e / (T(1.0) + e);
}

template <typename T>
T softplus(const T& x, double beta = 1.0) {
  using std::exp;
  using std::log1p;
  const T t = x * beta;
  if (t > T(30.0)) return x + exp(-t) / beta;
  return log1p(exp(t)) / beta;
}

/// Inverse of softplus on (0, inf).
inline double softplus_inv(double y, double beta = 1.0) {
  if (!(y > 0.0)) throw std::domain_error("softplus_inv: argument must be > 0");
  const double t = beta * y;
  if (t > 30.0) return y + std::log1p(-std::exp(-t)) / beta;
  return std::log(std::expm1(t)) / beta;
}

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace flowgpr::special
