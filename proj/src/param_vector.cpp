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

#include "flowgpr/param_vector.hpp"

namespace flowgpr::grad {

StackLayout layout_of(const flows::FlowStack& stack) {
  StackLayout layout;
  layout.dim = stack.dim;
  layout.softplus_beta = stack.softplus_beta;
  Index offset = 0;
  const Index d = stack.dim;
  auto add = [&](int layer, const char* field, Index size) {
    layout.fields.push_back({layer, field, offset, size});
    offset += size;
  };
  for (std::size_t k = 0; k < stack.layers.size(); ++k) {
    const int li = static_cast<int>(k);
    StackLayout::LayerSpec spec;
    spec.kind = flows::kind_of(stack.layers[k]);
    switch (spec.kind) {
      case flows::LayerKind::diag_affine:
        add(li, "shift", d);
        add(li, "log_scale", d);
        break;
      case flows::LayerKind::radial:
        add(li, "alpha_raw", 1);
        add(li, "beta_raw", 1);
        add(li, "center", d);
        break;
      case flows::LayerKind::sylvester: {
        const auto& p = std::get<flows::SylvesterLayer<double>>(stack.layers[k]);
        const Index m = p.bias.size();
        spec.width = m;
        add(li, "householder", m * d);
        add(li, "r1_upper", m * (m - 1) / 2);
        add(li, "r2_upper", m * (m - 1) / 2);
        add(li, "r1_diag_raw", m);
        add(li, "r2_diag_raw", m);
        add(li, "bias", m);
        break;
      }
    }
    layout.layers.push_back(spec);
  }
  layout.total = offset;
  return layout;
}

Vec pack(const flows::FlowStack& stack) {
  const StackLayout layout = layout_of(stack);
  Vec flat(layout.total);
  Index cursor = 0;
  auto put = [&](double v) { flat[cursor++] = v; };
  for (const auto& layer : stack.layers) {
    switch (flows::kind_of(layer)) {
      case flows::LayerKind::diag_affine: {
        const auto& p = std::get<flows::DiagAffineLayer<double>>(layer);
        for (Index i = 0; i < p.shift.size(); ++i) put(p.shift[i]);
        for (Index i = 0; i < p.log_scale.size(); ++i) put(p.log_scale[i]);
        break;
      }
      case flows::LayerKind::radial: {
        const auto& p = std::get<flows::RadialLayer<double>>(layer);
        put(p.alpha_raw);
        put(p.beta_raw);
        for (Index i = 0; i < p.center.size(); ++i) put(p.center[i]);
        break;
      }
      case flows::LayerKind::sylvester: {
        const auto& p = std::get<flows::SylvesterLayer<double>>(layer);
        const Index m = p.bias.size();
        for (Index i = 0; i < m; ++i)
          for (Index j = 0; j < p.householder.cols(); ++j) put(p.householder(i, j));
        for (Index i = 0; i < m; ++i)
          for (Index j = i + 1; j < m; ++j) put(p.r1_upper(i, j));
        for (Index i = 0; i < m; ++i)
          for (Index j = i + 1; j < m; ++j) put(p.r2_upper(i, j));
        for (Index i = 0; i < m; ++i) put(p.r1_diag_raw[i]);
        for (Index i = 0; i < m; ++i) put(p.r2_diag_raw[i]);
        for (Index i = 0; i < m; ++i) put(p.bias[i]);
        break;
      }
    }
  }
  return flat;
}

}  // namespace flowgpr::grad
