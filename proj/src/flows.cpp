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

#include "flowgpr/flows.hpp"

#include <cmath>

#include "flowgpr/random.hpp"

namespace flowgpr::flows {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Vec inverse_diag_affine(const Vec& z, const DiagAffineLayer<double>& p) {
  return (z - p.shift).cwiseQuotient(p.log_scale.array().exp().matrix());
}

Vec inverse_radial(const Vec& z, const RadialLayer<double>& p) {
  const double alpha = special::softplus(p.alpha_raw);
  const double beta = special::softplus(p.beta_raw) - alpha;
  const Vec w = z - p.center;
  const double rho = w.norm();
  if (rho == 0.0) return p.center;

  // Solve r (1 + beta / (alpha + r)) = rho; the left side is strictly
  // increasing in r >= 0.
  auto g = [&](double r) { return r + beta * r / (alpha + r) - rho; };
  double lo = 0.0, hi = rho + std::abs(beta) + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double r = 0.5 * (lo + hi);
  return p.center + w * (r / rho);
}

struct SylvesterDense {
  Mat a;  // D x M, Q R
  Mat b;  // M x D, R~ Q^T
  Vec bias;
};

SylvesterDense materialize(const SylvesterLayer<double>& p, Index dim) {
  const Index m = p.bias.size();
  Mat qhat = Mat::Zero(dim, m);
  for (Index j = 0; j < m; ++j) {
    VecX<double> e = Vec::Zero(dim);
    e[j] = 1.0;
    for (Index i = m - 1; i >= 0; --i) detail::apply_reflection(p.householder.row(i), e);
    qhat.col(j) = e;
  }
  Mat r1 = Mat::Zero(m, m), r2 = Mat::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    r1(i, i) = std::tanh(p.r1_diag_raw[i]);
    r2(i, i) = std::tanh(p.r2_diag_raw[i]);
    for (Index j = i + 1; j < m; ++j) {
      r1(i, j) = p.r1_upper(i, j);
      r2(i, j) = p.r2_upper(i, j);
    }
  }
  return {qhat * r1, r2 * qhat.transpose(), p.bias};
}

Vec inverse_sylvester(const Vec& z, const SylvesterLayer<double>& p, double tol) {
  const SylvesterDense d = materialize(p, z.size());
  Vec u = z;  // layers operate near the identity
  auto residual = [&](const Vec& x) -> Vec {
    const Vec w = d.b * x + d.bias;
    return x + d.a * w.array().tanh().matrix() - z;
  };
  Vec g = residual(u);
  for (int it = 0; it < 200; ++it) {
    if (g.cwiseAbs().maxCoeff() <= tol) return u;
    const Vec w = d.b * u + d.bias;
    const Vec hprime = 1.0 - w.array().tanh().square();
    const Mat jac = Mat::Identity(z.size(), z.size()) + d.a * hprime.asDiagonal() * d.b;
    const Vec du = jac.partialPivLu().solve(-g);
    double step = 1.0;
    Vec u_next = u + du;
    Vec g_next = residual(u_next);
    int backtrack = 0;
    while (g_next.norm() > g.norm() && backtrack < 40) {
      step *= 0.5;
      u_next = u + step * du;
      g_next = residual(u_next);
      ++backtrack;
    }
    u = u_next;
    g = g_next;
  }
  throw NumericalError("layer_inverse: sylvester inversion did not converge, residual " +
                       std::to_string(g.cwiseAbs().maxCoeff()));
}

}  // namespace

double base_log_density(const Vec& u) {
  return -0.5 * static_cast<double>(u.size()) * kLog2Pi - 0.5 * u.squaredNorm();
}

Vec layer_inverse(const Vec& z, const FlowLayer<double>& layer, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("layer_inverse: tol must be > 0");
  switch (kind_of(layer)) {
    case LayerKind::diag_affine:
      return inverse_diag_affine(z, std::get<DiagAffineLayer<double>>(layer));
    case LayerKind::radial:
      return inverse_radial(z, std::get<RadialLayer<double>>(layer));
    case LayerKind::sylvester:
      return inverse_sylvester(z, std::get<SylvesterLayer<double>>(layer), tol);
  }
  throw std::logic_error("layer_inverse: unknown layer kind");
}

double log_q_density(const Vec& xi, const FlowStack& stack, double tol) {
  if (xi.size() != stack.dim) throw std::invalid_argument("log_q_density: dimension mismatch");
  const double beta = stack.softplus_beta;
  Vec u(xi.size());
  double log_det = 0.0;
  for (Index i = 0; i < xi.size(); ++i) {
    if (!(xi[i] > 0.0)) throw std::domain_error("log_q_density: xi must be strictly positive");
    u[i] = special::softplus_inv(xi[i], beta);
    log_det += special::log_sigmoid(beta * u[i]);
  }
  for (auto it = stack.layers.rbegin(); it != stack.layers.rend(); ++it) {
    const Vec u_prev = layer_inverse(u, *it, tol);
    log_det += layer_forward(u_prev, *it).log_det;
    u = u_prev;
  }
  return base_log_density(u) - log_det;
}

FlowLayer<double> make_diag_affine(Index dim) {
  DiagAffineLayer<double> p;
  p.shift = Vec::Zero(dim);
  p.log_scale = Vec::Zero(dim);
  return p;
}

FlowLayer<double> make_radial(Index dim) {
  RadialLayer<double> p;
  // alpha_raw = 0 gives alpha = log 2, and softplus(0) = log 2 makes beta
  // exactly 0: the layer starts as the identity.
  p.alpha_raw = 0.0;
  p.beta_raw = 0.0;
  p.center = Vec::Zero(dim);
  return p;
}

FlowLayer<double> make_sylvester(Index dim, Index width, RandomStream& rng, double init_scale) {
  if (width < 1 || width > dim)
    throw std::invalid_argument("make_sylvester: width must be in [1, dim]");
  SylvesterLayer<double> p;
  p.householder.resize(width, dim);
  for (Index i = 0; i < width; ++i) {
    Vec v = rng.normal_vector(dim);
    p.householder.row(i) = v / v.norm();
  }
  p.r1_upper = Mat::Zero(width, width);
  p.r2_upper = Mat::Zero(width, width);
  for (Index i = 0; i < width; ++i)
    for (Index j = i + 1; j < width; ++j) {
      p.r1_upper(i, j) = init_scale * rng.normal();
      p.r2_upper(i, j) = init_scale * rng.normal();
    }
  p.r1_diag_raw = Vec::Zero(width);
  p.r2_diag_raw = Vec::Zero(width);
  for (Index i = 0; i < width; ++i) {
    p.r1_diag_raw[i] = init_scale * rng.normal();
    p.r2_diag_raw[i] = init_scale * rng.normal();
  }
  p.bias = Vec::Zero(width);
  for (Index i = 0; i < width; ++i) p.bias[i] = init_scale * rng.normal();
  return p;
}

FlowStack make_stack(Index dim, int n_sylvester, Index width, bool affine_base,
                     double softplus_beta, RandomStream& rng) {
  if (dim < 1) throw std::invalid_argument("make_stack: dim must be >= 1");
  if (!(softplus_beta > 0.0)) throw std::invalid_argument("make_stack: softplus_beta must be > 0");
  if (width == 0) width = std::min<Index>(dim, 8);
  FlowStack stack;
  stack.dim = dim;
  stack.softplus_beta = softplus_beta;
  if (affine_base) stack.layers.push_back(make_diag_affine(dim));
  for (int k = 0; k < n_sylvester; ++k)
    stack.layers.push_back(make_sylvester(dim, width, rng));
  return stack;
}

}  // namespace flowgpr::flows
