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

#include <variant>
#include <vector>

#include "flowgpr/special_functions.hpp"
#include "flowgpr/types.hpp"

namespace flowgpr {
class RandomStream;
}

namespace flowgpr::flows {

// Layer parameters are stored unconstrained; constrained quantities
// (positive scales, contraction coefficients, triangular diagonals in
// (-1, 1)) are produced inside the forward pass so optimization is free.

template <typename T>
struct DiagAffineLayer {
  VecX<T> shift;
  VecX<T> log_scale;
};

template <typename T>
struct RadialLayer {
  T alpha_raw;  // alpha = softplus(alpha_raw) > 0
  T beta_raw;   // beta = -alpha + softplus(beta_raw) >= -alpha
  VecX<T> center;
};

template <typename T>
struct SylvesterLayer {
  MatX<T> householder;  // M x D, rows define reflections building Q
  MatX<T> r1_upper;     // strict upper part of R
  MatX<T> r2_upper;     // strict upper part of R~
  VecX<T> r1_diag_raw;  // diagonals via tanh, keeping products in (-1, 1)
  VecX<T> r2_diag_raw;
  VecX<T> bias;
};

template <typename T>
using FlowLayer = std::variant<DiagAffineLayer<T>, RadialLayer<T>, SylvesterLayer<T>>;

enum class LayerKind { diag_affine, radial, sylvester };

template <typename T>
LayerKind kind_of(const FlowLayer<T>& layer) {
  return static_cast<LayerKind>(layer.index());
}

/// Composition of invertible layers followed by an elementwise softplus map
/// onto the positive orthant; defines the variational density.
template <typename T>
struct FlowStackT {
  Index dim = 0;
  double softplus_beta = 1.0;
  std::vector<FlowLayer<T>> layers;
};

using FlowStack = FlowStackT<double>;

template <typename T>
struct LayerResult {
  VecX<T> u;
  T log_det;
};

namespace detail {

// x <- H x with H = I - 2 q q^T, q the normalized reflection vector.
template <typename T, typename Row>
void apply_reflection(const Row& v, VecX<T>& x) {
  const T norm2 = v.squaredNorm();
  if (!(norm2 > T(0.0)))
    throw std::invalid_argument("sylvester layer: degenerate reflection vector");
  const T coef = (v.dot(x)) * (T(2.0) / norm2);
  x -= coef * v.transpose();
}

template <typename T>
LayerResult<T> forward(const VecX<T>& u, const DiagAffineLayer<T>& p) {
  using std::exp;
  LayerResult<T> out;
  out.u.resize(u.size());
  out.log_det = T(0.0);
  for (Index i = 0; i < u.size(); ++i) {
    out.u[i] = p.shift[i] + exp(p.log_scale[i]) * u[i];
    out.log_det += p.log_scale[i];
  }
  return out;
}

template <typename T>
LayerResult<T> forward(const VecX<T>& u, const RadialLayer<T>& p) {
  using std::log1p;
  using std::sqrt;
  const Index d = u.size();
  const T alpha = special::softplus(p.alpha_raw);
  const T beta = special::softplus(p.beta_raw) - alpha;
  const VecX<T> v = u - p.center;
  const T r = sqrt(v.squaredNorm());
  const T h = T(1.0) / (alpha + r);
  const T bh = beta * h;

  LayerResult<T> out;
  out.u = u + bh * v;
  out.log_det = double(d - 1) * log1p(bh) + log1p(beta * alpha * h * h);
  return out;
}

template <typename T>
LayerResult<T> forward(const VecX<T>& u, const SylvesterLayer<T>& p) {
  using std::log1p;
  using std::tanh;
  const Index m = p.bias.size();
  const Index d = u.size();

  // p_head = Q^T u restricted to the first m coordinates.
  VecX<T> x = u;
  for (Index i = 0; i < m; ++i) apply_reflection(p.householder.row(i), x);
  const VecX<T> p_head = x.head(m);

  VecX<T> r1d(m), r2d(m);
  for (Index i = 0; i < m; ++i) {
    r1d[i] = tanh(p.r1_diag_raw[i]);
    r2d[i] = tanh(p.r2_diag_raw[i]);
  }

  // w = R~ (Q^T u)_head + b with R~ upper triangular.
  VecX<T> w = p.bias;
  for (Index i = 0; i < m; ++i) {
    T acc = r2d[i] * p_head[i];
    for (Index j = i + 1; j < m; ++j) acc += p.r2_upper(i, j) * p_head[j];
    w[i] += acc;
  }

  VecX<T> hw(m), hprime(m);
  for (Index i = 0; i < m; ++i) {
    hw[i] = tanh(w[i]);
    hprime[i] = T(1.0) - hw[i] * hw[i];
  }

  // y = R h(w), padded to dimension d, then rotated back through Q.
  VecX<T> y = VecX<T>::Zero(d);
  for (Index i = 0; i < m; ++i) {
    T acc = r1d[i] * hw[i];
    for (Index j = i + 1; j < m; ++j) acc += p.r1_upper(i, j) * hw[j];
    y[i] = acc;
  }
  for (Index i = m - 1; i >= 0; --i) apply_reflection(p.householder.row(i), y);

  LayerResult<T> out;
  out.u = u + y;
  out.log_det = T(0.0);
  for (Index i = 0; i < m; ++i) out.log_det += log1p(hprime[i] * r1d[i] * r2d[i]);
  return out;
}

}  // namespace detail

template <typename T>
LayerResult<T> layer_forward(const VecX<T>& u, const FlowLayer<T>& layer) {
  return std::visit([&](const auto& p) { return detail::forward(u, p); }, layer);
}

template <typename T>
struct StackResult {
  VecX<T> xi;      // strictly positive
  T log_det;       // includes the softplus contribution
};

template <typename T>
StackResult<T> stack_forward(const VecX<T>& u0, const FlowStackT<T>& stack) {
  if (u0.size() != stack.dim)
    throw std::invalid_argument("stack_forward: dimension mismatch");
  VecX<T> u = u0;
  T log_det = T(0.0);
  for (const auto& layer : stack.layers) {
    LayerResult<T> r = layer_forward(u, layer);
    u = std::move(r.u);
    log_det += r.log_det;
  }
  StackResult<T> out;
  out.xi.resize(u.size());
  const double beta = stack.softplus_beta;
  for (Index i = 0; i < u.size(); ++i) {
    out.xi[i] = special::softplus(u[i], beta);
    log_det += special::log_sigmoid(u[i] * beta);
  }
  out.log_det = log_det;
  return out;
}

/// Standard Gaussian base log density.
double base_log_density(const Vec& u);

/// Inverse of a single layer; radial inversion is a scalar root find on the
/// radius, sylvester a damped Newton iteration. The result u satisfies
/// |forward(u) - z|_inf <= tol.
Vec layer_inverse(const Vec& z, const FlowLayer<double>& layer, double tol = 1e-12);

/// log q(xi) by inverting softplus and all layers, then applying the change
/// of variables against the Gaussian base.
double log_q_density(const Vec& xi, const FlowStack& stack, double tol = 1e-12);

FlowLayer<double> make_diag_affine(Index dim);
FlowLayer<double> make_radial(Index dim);
FlowLayer<double> make_sylvester(Index dim, Index width, RandomStream& rng,
                                 double init_scale = 5e-4);

/// Standard stack: optional learned diagonal-affine base followed by
/// n_sylvester sylvester layers. width == 0 selects min(dim, 8).
FlowStack make_stack(Index dim, int n_sylvester, Index width, bool affine_base,
                     double softplus_beta, RandomStream& rng);

}  // namespace flowgpr::flows
