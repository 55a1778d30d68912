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
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace flowgpr::ad {

/// Flat reverse-mode tape. Nodes are appended in evaluation order; a single
/// backward sweep accumulates adjoints in a fixed order, so gradients are
/// bit-reproducible for identical evaluation sequences.
class Tape {
 public:
  int add_leaf(double value) {
    values_.push_back(value);
    nodes_.push_back({static_cast<int>(deps_.size()), static_cast<int>(deps_.size())});
    return static_cast<int>(values_.size()) - 1;
  }

  int push(double value, const int* parents, const double* partials, int n) {
    const int begin = static_cast<int>(deps_.size());
    for (int i = 0; i < n; ++i) deps_.push_back({parents[i], partials[i]});
    values_.push_back(value);
    nodes_.push_back({begin, begin + n});
    return static_cast<int>(values_.size()) - 1;
  }

  void backward(int root, std::vector<double>& adjoints) const {
    adjoints.assign(values_.size(), 0.0);
    if (root < 0) return;
    adjoints[static_cast<std::size_t>(root)] = 1.0;
    for (int i = root; i >= 0; --i) {
      const double a = adjoints[static_cast<std::size_t>(i)];
      if (a == 0.0) continue;
      const Node& nd = nodes_[static_cast<std::size_t>(i)];
      for (int k = nd.begin; k < nd.end; ++k)
        adjoints[static_cast<std::size_t>(deps_[static_cast<std::size_t>(k)].parent)] +=
            deps_[static_cast<std::size_t>(k)].partial * a;
    }
  }

  double value(int idx) const { return values_[static_cast<std::size_t>(idx)]; }
  std::size_t size() const { return values_.size(); }

  void reserve(std::size_t nodes, std::size_t deps) {
    values_.reserve(nodes);
    nodes_.reserve(nodes);
    deps_.reserve(deps);
  }

 private:
  struct Node {
    int begin;
    int end;
  };
  struct Dep {
    int parent;
    double partial;
  };
  std::vector<Node> nodes_;
  std::vector<Dep> deps_;
  std::vector<double> values_;
};

/// Value plus tape handle. A default-constructed or double-constructed Var is
/// a constant (not recorded); leaves are created through Var(Tape*, value).
class Var {
 public:
  Var() = default;
  Var(double c) : v_(c) {}  // NOLINT: implicit constants by design
  Var(Tape* tape, double value) : v_(value), idx_(tape->add_leaf(value)), tape_(tape) {}

  static Var tracked(Tape* tape, double value, int idx) {
    Var x;
    x.v_ = value;
    x.idx_ = idx;
    x.tape_ = tape;
    return x;
  }

  double value() const { return v_; }
  int index() const { return idx_; }
  Tape* tape() const { return tape_; }
  bool on_tape() const { return idx_ >= 0; }

  Var operator-() const;
  Var& operator+=(const Var& o);
  Var& operator-=(const Var& o);
  Var& operator*=(const Var& o);
  Var& operator/=(const Var& o);

 private:
  double v_ = 0.0;
  int idx_ = -1;
  Tape* tape_ = nullptr;
};

namespace detail {

inline Tape* joint_tape(const Var& a, const Var& b) {
  return a.tape() != nullptr ? a.tape() : b.tape();
}

inline Var record1(double value, const Var& a, double da) {
  if (!a.on_tape()) return Var(value);
  const int p = a.index();
  const int idx = a.tape()->push(value, &p, &da, 1);
  return Var::tracked(a.tape(), value, idx);
}

inline Var record2(double value, const Var& a, double da, const Var& b, double db) {
  Tape* t = joint_tape(a, b);
  if (t == nullptr) return Var(value);
  int parents[2];
  double partials[2];
  int n = 0;
  if (a.on_tape()) {
    parents[n] = a.index();
    partials[n++] = da;
  }
  if (b.on_tape()) {
    parents[n] = b.index();
    partials[n++] = db;
  }
  const int idx = t->push(value, parents, partials, n);
  return Var::tracked(t, value, idx);
}

}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  return detail::record2(a.value() + b.value(), a, 1.0, b, 1.0);
}
inline Var operator-(const Var& a, const Var& b) {
  return detail::record2(a.value() - b.value(), a, 1.0, b, -1.0);
}
inline Var operator*(const Var& a, const Var& b) {
  return detail::record2(a.value() * b.value(), a, b.value(), b, a.value());
}
inline Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.value();
  return detail::record2(a.value() * inv, a, inv, b, -a.value() * inv * inv);
}

inline Var operator+(const Var& a, double b) { return detail::record1(a.value() + b, a, 1.0); }
inline Var operator+(double a, const Var& b) { return b + a; }
inline Var operator-(const Var& a, double b) { return detail::record1(a.value() - b, a, 1.0); }
inline Var operator-(double a, const Var& b) { return detail::record1(a - b.value(), b, -1.0); }
inline Var operator*(const Var& a, double b) { return detail::record1(a.value() * b, a, b); }
inline Var operator*(double a, const Var& b) { return b * a; }
inline Var operator/(const Var& a, double b) { return a * (1.0 / b); }
inline Var operator/(double a, const Var& b) {
  const double inv = 1.0 / b.value();
  return detail::record1(a * inv, b, -a * inv * inv);
}

inline Var Var::operator-() const { return detail::record1(-v_, *this, -1.0); }
inline Var& Var::operator+=(const Var& o) { return *this = *this + o; }
inline Var& Var::operator-=(const Var& o) { return *this = *this - o; }
inline Var& Var::operator*=(const Var& o) { return *this = *this * o; }
inline Var& Var::operator/=(const Var& o) { return *this = *this / o; }

inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }
inline bool operator==(const Var& a, const Var& b) { return a.value() == b.value(); }
inline bool operator!=(const Var& a, const Var& b) { return a.value() != b.value(); }

inline Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return detail::record1(e, x, e);
}
inline Var log(const Var& x) {
  return detail::record1(std::log(x.value()), x, 1.0 / x.value());
}
inline Var log1p(const Var& x) {
  return detail::record1(std::log1p(x.value()), x, 1.0 / (1.0 + x.value()));
}
inline Var sqrt(const Var& x) {
  const double r = std::sqrt(x.value());
  return detail::record1(r, x, 0.5 / r);
}
inline Var tanh(const Var& x) {
  const double t = std::tanh(x.value());
  return detail::record1(t, x, 1.0 - t * t);
}
inline Var abs(const Var& x) {
  return detail::record1(std::abs(x.value()), x, x.value() >= 0.0 ? 1.0 : -1.0);
}
inline Var pow(const Var& x, double p) {
  return detail::record1(std::pow(x.value(), p), x, p * std::pow(x.value(), p - 1.0));
}

// Eigen support.
inline const Var& conj(const Var& x) { return x; }
inline const Var& real(const Var& x) { return x; }
inline Var imag(const Var&) { return Var(0.0); }
inline Var abs2(const Var& x) { return x * x; }

/// Node with externally supplied value and partials; constant inputs are
/// skipped. Used to splice hand-derived gradients (GP likelihood, prior
/// densities) into the tape.
inline Var custom_node(Tape& tape, std::span<const Var> inputs, double value,
                       std::span<const double> partials) {
  std::vector<int> parents;
  std::vector<double> parts;
  parents.reserve(inputs.size());
  parts.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].on_tape()) {
      parents.push_back(inputs[i].index());
      parts.push_back(partials[i]);
    }
  }
  const int idx = tape.push(value, parents.data(), parts.data(), static_cast<int>(parents.size()));
  return Var::tracked(&tape, value, idx);
}

}  // namespace flowgpr::ad

namespace Eigen {

template <>
struct NumTraits<flowgpr::ad::Var> {
  using Real = flowgpr::ad::Var;
  using NonInteger = flowgpr::ad::Var;
  using Nested = flowgpr::ad::Var;
  using Literal = double;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3
  };
  static inline Real epsilon() { return Real(std::numeric_limits<double>::epsilon()); }
  static inline Real dummy_precision() { return Real(1e-12); }
  static inline Real highest() { return Real(std::numeric_limits<double>::max()); }
  static inline Real lowest() { return Real(std::numeric_limits<double>::lowest()); }
  static inline int digits10() { return std::numeric_limits<double>::digits10; }
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<flowgpr::ad::Var, double, BinaryOp> {
  using ReturnType = flowgpr::ad::Var;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, flowgpr::ad::Var, BinaryOp> {
  using ReturnType = flowgpr::ad::Var;
};

}  // namespace Eigen
