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

#include "flowgpr/flows.hpp"
#include "flowgpr/types.hpp"

namespace flowgpr::grad {

/// One named slice of the flat parameter vector.
struct FieldRange {
  int layer = 0;
  std::string field;
  Index offset = 0;
  Index size = 0;
};

/// Shape of a flow stack plus the flat-vector layout of all its parameters.
/// Field order per layer is fixed and documented here:
///   diag_affine: shift (D), log_scale (D)
///   radial:      alpha_raw, beta_raw, center (D)
///   sylvester:   householder (M*D, row major), r1_upper (strict upper, row
///                major), r2_upper (strict upper), r1_diag_raw (M),
///                r2_diag_raw (M), bias (M)
struct StackLayout {
  struct LayerSpec {
    flows::LayerKind kind = flows::LayerKind::diag_affine;
    Index width = 0;  // sylvester bottleneck; unused otherwise
  };

  Index dim = 0;
  double softplus_beta = 1.0;
  std::vector<LayerSpec> layers;
  std::vector<FieldRange> fields;
  Index total = 0;
};

StackLayout layout_of(const flows::FlowStack& stack);

/// Flatten all stack parameters in layout order.
Vec pack(const flows::FlowStack& stack);

namespace detail {

template <typename T>
VecX<T> take(const T* flat, Index& cursor, Index n) {
  VecX<T> v(n);
  for (Index i = 0; i < n; ++i) v[i] = flat[cursor + i];
  cursor += n;
  return v;
}

}  // namespace detail

/// Rebuild a stack (over any scalar type) from a flat parameter array laid
/// out per `layout`. Exact inverse of pack for T = double.
template <typename T>
flows::FlowStackT<T> unpack(const StackLayout& layout, const T* flat) {
  flows::FlowStackT<T> stack;
  stack.dim = layout.dim;
  stack.softplus_beta = layout.softplus_beta;
  Index cursor = 0;
  const Index d = layout.dim;
  for (const auto& spec : layout.layers) {
    switch (spec.kind) {
      case flows::LayerKind::diag_affine: {
        flows::DiagAffineLayer<T> p;
        p.shift = detail::take(flat, cursor, d);
        p.log_scale = detail::take(flat, cursor, d);
        stack.layers.push_back(std::move(p));
        break;
      }
      case flows::LayerKind::radial: {
        flows::RadialLayer<T> p;
        p.alpha_raw = flat[cursor++];
        p.beta_raw = flat[cursor++];
        p.center = detail::take(flat, cursor, d);
        stack.layers.push_back(std::move(p));
        break;
      }
      case flows::LayerKind::sylvester: {
        const Index m = spec.width;
        flows::SylvesterLayer<T> p;
        p.householder.resize(m, d);
        for (Index i = 0; i < m; ++i)
          for (Index j = 0; j < d; ++j) p.householder(i, j) = flat[cursor++];
        p.r1_upper = MatX<T>::Zero(m, m);
        for (Index i = 0; i < m; ++i)
          for (Index j = i + 1; j < m; ++j) p.r1_upper(i, j) = flat[cursor++];
        p.r2_upper = MatX<T>::Zero(m, m);
        for (Index i = 0; i < m; ++i)
          for (Index j = i + 1; j < m; ++j) p.r2_upper(i, j) = flat[cursor++];
        p.r1_diag_raw = detail::take(flat, cursor, m);
        p.r2_diag_raw = detail::take(flat, cursor, m);
        p.bias = detail::take(flat, cursor, m);
        stack.layers.push_back(std::move(p));
        break;
      }
    }
  }
  if (cursor != layout.total)
    throw std::logic_error("unpack: layout does not cover the flat vector");
  return stack;
}

}  // namespace flowgpr::grad
