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

#include "flowgpr/special_functions.hpp"

#include <algorithm>
#include <limits>

namespace flowgpr::special {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// After the substitution t = e^s the integrand of Gamma(a) U(a,b,z) becomes
// exp(phi(s)) with
//   phi(s) = a s - z e^s + c1 log(1 + e^s),   c1 = b - a - 1,
// smooth on the whole real line with exponential decay on the left (rate a)
// and at least exponential decay on the right.
struct LogIntegrand {
  double a, z, c1;

  double phi(double s) const {
    const double es = std::exp(s);
    const double l1p = s > 30.0 ? s + std::log1p(std::exp(-s)) : std::log1p(es);
    return a * s - z * es + c1 * l1p;
  }

  double dphi(double s) const {
    const double sig = sigmoid(s);
    return a - z * std::exp(s) + c1 * sig;
  }
};

struct Grid {
  double s_lo = 0.0;
  double s_hi = 0.0;
  double s_peak = 0.0;
};

// phi' starts at a > 0 and has exactly one sign change.
Grid locate_support(const LogIntegrand& f) {
  double lo = 0.0;
  double step = 1.0;
  int guard = 0;
  while (f.dphi(lo) <= 0.0) {
    lo -= step;
    step *= 2.0;
    if (++guard > 200) throw NumericalError("log_hyp_u: failed to bracket peak (left)");
  }
  double hi = lo;
  step = 1.0;
  guard = 0;
  while (f.dphi(hi) > 0.0) {
    hi += step;
    step *= 2.0;
    if (++guard > 200) throw NumericalError("log_hyp_u: failed to bracket peak (right)");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f.dphi(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  Grid g;
  g.s_peak = 0.5 * (lo + hi);

  // Left edge: far enough out that the two-term tail expansion is accurate.
  g.s_lo = std::min(-14.0, g.s_peak - 20.0);

  // Right edge: march until the integrand has dropped 48 nats below the peak.
  const double target = f.phi(g.s_peak) - 48.0;
  double s = std::max(g.s_peak, g.s_lo) + 1.0;
  guard = 0;
  while (f.phi(s) > target) {
    s += 1.0;
    if (++guard > 1000000) throw NumericalError("log_hyp_u: right tail does not decay");
  }
  g.s_hi = s;
  return g;
}

struct GridSums {
  double log_sum = -kInf;        // log sum_k w_k e^{phi_k} h
  double log_sum_dz = -kInf;     // log sum_k w_k e^{phi_k + s_k} h
};

GridSums trapezoid_sums(const LogIntegrand& f, const Grid& g, int n) {
  const double h = (g.s_hi - g.s_lo) / static_cast<double>(n - 1);
  std::vector<double> phis(static_cast<std::size_t>(n));
  double mx = -kInf, mx_dz = -kInf;
  for (int k = 0; k < n; ++k) {
    const double s = g.s_lo + h * k;
    double p = f.phi(s);
    if (k == 0 || k == n - 1) p += std::log(0.5);
    phis[static_cast<std::size_t>(k)] = p;
    mx = std::max(mx, p);
    mx_dz = std::max(mx_dz, p + s);
  }
  double acc = 0.0, acc_dz = 0.0;
  for (int k = 0; k < n; ++k) {
    const double s = g.s_lo + h * k;
    const double p = phis[static_cast<std::size_t>(k)];
    acc += std::exp(p - mx);
    acc_dz += std::exp(p + s - mx_dz);
  }
  GridSums out;
  out.log_sum = mx + std::log(acc) + std::log(h);
  out.log_sum_dz = mx_dz + std::log(acc_dz) + std::log(h);

  // Euler-Maclaurin endpoint correction -h^2/12 (f'(hi) - f'(lo)); the
  // integrand slope is phi' e^phi, positive at the left edge and negative
  // (and 48 nats down) at the right edge, so both terms add.
  const double lo_slope = f.dphi(g.s_lo);
  if (lo_slope > 0.0) {
    const double corr = std::log(h * h / 12.0 * lo_slope) + f.phi(g.s_lo);
    out.log_sum = log_add_exp(out.log_sum, corr);
    out.log_sum_dz = log_add_exp(
        out.log_sum_dz, std::log(h * h / 12.0 * (lo_slope + 1.0)) + f.phi(g.s_lo) + g.s_lo);
  }
  const double hi_slope = f.dphi(g.s_hi);
  if (hi_slope < 0.0)
    out.log_sum = log_add_exp(out.log_sum, std::log(h * h / 12.0 * (-hi_slope)) + f.phi(g.s_hi));
  return out;
}

struct Eval {
  double log_i = 0.0;      // log of the full integral
  double dlogi_dz = 0.0;
};

Eval evaluate_order(const LogIntegrand& f, const Grid& g, int n) {
  const GridSums sums = trapezoid_sums(f, g, n);

  // Analytic left tail: integrand ~ e^{a s} (1 + (c1 - z) e^s + O(e^{2s})).
  const double esl = std::exp(g.s_lo);
  const double bracket = 1.0 / f.a + (f.c1 - f.z) * esl / (f.a + 1.0);
  const double log_tail = f.a * g.s_lo + std::log(bracket);
  const double log_tail_dz = (f.a + 1.0) * g.s_lo - std::log(f.a + 1.0);

  Eval ev;
  ev.log_i = log_add_exp(sums.log_sum, log_tail);
  const double log_num = log_add_exp(sums.log_sum_dz, log_tail_dz);
  ev.dlogi_dz = -std::exp(log_num - ev.log_i);
  return ev;
}

Eval evaluate_adaptive(double a, double b, double z) {
  const LogIntegrand f{a, z, b - a - 1.0};
  const Grid g = locate_support(f);
  Eval prev = evaluate_order(f, g, 128);
  for (int n = 256; n <= 1024; n *= 2) {
    const Eval cur = evaluate_order(f, g, n);
    const bool converged = std::abs(cur.log_i - prev.log_i) <= 1e-8;
    prev = cur;
    if (converged) break;
  }
  return prev;
}

void check_domain(double a, double z) {
  if (!(a > 0.0)) throw std::domain_error("log_hyp_u: a must be > 0");
  if (!(z > 0.0)) throw std::domain_error("log_hyp_u: z must be > 0");
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: argument must be > 0");
  return std::lgamma(x);
}

double log_beta(double a, double c) { return log_gamma(a) + log_gamma(c) - log_gamma(a + c); }

double log_hyp_u(double a, double b, double z) {
  check_domain(a, z);
  return evaluate_adaptive(a, b, z).log_i - log_gamma(a);
}

double log_hyp_u_order(double a, double b, double z, int order) {
  check_domain(a, z);
  if (order < 2) throw std::invalid_argument("log_hyp_u_order: order must be >= 2");
  const LogIntegrand f{a, z, b - a - 1.0};
  const Grid g = locate_support(f);
  return evaluate_order(f, g, order).log_i - log_gamma(a);
}

HypUResult log_hyp_u_grad(double a, double b, double z) {
  check_domain(a, z);
  const Eval ev = evaluate_adaptive(a, b, z);
  return HypUResult{ev.log_i - log_gamma(a), ev.dlogi_dz};
}

QuadratureRule hyp_u_rule(double a, double b, double z, int order) {
  check_domain(a, z);
  if (order < 2) throw std::invalid_argument("hyp_u_rule: order must be >= 2");
  const LogIntegrand f{a, z, b - a - 1.0};
  const Grid g = locate_support(f);
  const double h = (g.s_hi - g.s_lo) / static_cast<double>(order - 1);
  QuadratureRule rule;
  rule.order = order;
  rule.nodes.reserve(static_cast<std::size_t>(order));
  rule.weights.reserve(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    const double s = g.s_lo + h * k;
    const double w = (k == 0 || k == order - 1) ? 0.5 : 1.0;
    rule.nodes.push_back(std::exp(s));
    rule.weights.push_back(w * h * std::exp(s));  // dt = e^s ds
  }
  return rule;
}

}  // namespace flowgpr::special
