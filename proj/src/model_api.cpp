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

#include "flowgpr/model_api.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "flowgpr/grad_engine.hpp"
#include "flowgpr/kernel.hpp"
#include "flowgpr/param_vector.hpp"
#include "flowgpr/random.hpp"
#include "flowgpr/special_functions.hpp"

namespace flowgpr::model {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * v[lo] + w * v[hi];
}

// Median of Gamma(1/2, rate 1/2): the conditional prior on theta at the
// shrinkage-factor boundary rho = 1/2. CDF is erf(sqrt(x/2)).
double shrinkage_reference_quantile() {
  double lo = 0.0, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (std::erf(std::sqrt(0.5 * mid)) < 0.5)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Log marginal likelihood over softplus-unconstrained parameters.
class MlObjective : public grad::Objective {
 public:
  MlObjective(const Mat& X, const Vec& y) : x_(X), y_(y) {}

  Index dim() const override { return x_.cols() + 2; }

  ad::Var evaluate(ad::Tape& tape, std::span<const ad::Var> params) const override {
    const Index d = dim();
    VecX<ad::Var> xi(d);
    Vec xi_values(d);
    for (Index i = 0; i < d; ++i) {
      xi[i] = special::softplus(params[static_cast<std::size_t>(i)]);
      xi_values[i] = xi[i].value();
    }
    HyperParams p = HyperParams::from_vector(xi_values);
    const kernel::LogLikGrad ll = kernel::log_marginal_likelihood_grad(y_, x_, p);
    Vec grad(d);
    grad.head(d - 2) = ll.dtheta;
    grad[d - 2] = ll.dtau;
    grad[d - 1] = ll.dsigma2;
    return ad::custom_node(tape, std::span<const ad::Var>(xi.data(), static_cast<std::size_t>(d)),
                           ll.value, std::span<const double>(grad.data(), static_cast<std::size_t>(d)));
  }

 private:
  const Mat& x_;
  const Vec& y_;
};

FitResult variational_fit(Method method, const data::Dataset& train,
                          const prior::TripleGammaConfig& prior_cfg, vi::VIConfig vi_cfg) {
  prior_cfg.validate();
  if (method == Method::mf) {
    vi_cfg.n_layers = 0;
    vi_cfg.affine_base = true;
  }
  const vi::FitOutput out = vi::fit(train.X, train.y, prior_cfg, vi_cfg);

  FitResult fit;
  fit.method = method;
  fit.stack = out.stack;
  fit.trace = out.trace.elbo;
  fit.trace_smoothed = out.trace.smoothed;
  fit.prior_cfg = prior_cfg;
  fit.seed = vi_cfg.seed;
  fit.x_train = train.X;
  fit.y_train = train.y;
  fit.standardization = train.standardization;
  fit.rejected_samples = out.trace.rejected_samples;
  fit.plateau = out.trace.plateau;
  fit.plateau_iteration = out.trace.plateau_iteration;
  return fit;
}

void write_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void write_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void write_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void write_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  write_u64(out, bits);
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return take(1)[0]; }

  std::uint32_t u32() {
    const std::uint8_t* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    const std::uint8_t* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  const std::uint8_t* take(std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw std::runtime_error("load_checkpoint: truncated checkpoint");
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

constexpr std::uint8_t kMagic[4] = {'F', 'G', 'P', 'R'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::nf: return "nf";
    case Method::mf: return "mf";
    case Method::ml: return "ml";
  }
  throw std::logic_error("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
  if (name == "nf") return Method::nf;
  if (name == "mf") return Method::mf;
  if (name == "ml") return Method::ml;
  throw std::invalid_argument("unknown method '" + name + "' (expected nf, mf or ml)");
}

FitResult fit_nf(const data::Dataset& train, const prior::TripleGammaConfig& prior_cfg,
                 const vi::VIConfig& vi_cfg) {
  return variational_fit(Method::nf, train, prior_cfg, vi_cfg);
}

FitResult fit_mf(const data::Dataset& train, const prior::TripleGammaConfig& prior_cfg,
                 const vi::VIConfig& vi_cfg) {
  return variational_fit(Method::mf, train, prior_cfg, vi_cfg);
}

FitResult fit_ml(const data::Dataset& train, const MlConfig& cfg) {
  if (cfg.n_restarts < 1) throw std::invalid_argument("fit_ml: n_restarts must be >= 1");
  if (train.n() < 2) throw std::invalid_argument("fit_ml: need at least two observations");
  const Index d = train.d();
  const MlObjective objective(train.X, train.y);

  bool have_best = false;
  double best_value = -std::numeric_limits<double>::infinity();
  Vec best_w;
  std::vector<double> best_trace;

  for (int restart = 0; restart < cfg.n_restarts; ++restart) {
    RandomStream rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(restart)));
    Vec w(d + 2);
    for (Index j = 0; j < d; ++j)
      w[j] = special::softplus_inv(std::exp(rng.uniform(std::log(1e-3), std::log(10.0))));
    w[d] = special::softplus_inv(std::exp(rng.uniform(std::log(1e-2), std::log(10.0))));
    w[d + 1] = special::softplus_inv(std::exp(rng.uniform(std::log(1e-2), std::log(10.0))));

    Vec m = Vec::Zero(d + 2), v = Vec::Zero(d + 2);
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(cfg.n_iterations));
    double value = -std::numeric_limits<double>::infinity();
    bool failed = false;
    for (int it = 0; it < cfg.n_iterations; ++it) {
      grad::GradResult g;
      try {
        g = grad::objective_gradient(objective, w);
      } catch (const std::exception&) {
        failed = true;
        break;
      }
      value = g.value;
      trace.push_back(value);
      const double t = static_cast<double>(it + 1);
      m = 0.9 * m + 0.1 * g.grad;
      v = 0.999 * v.array().matrix() + 0.001 * g.grad.array().square().matrix();
      w.array() += cfg.learning_rate * (m.array() / (1.0 - std::pow(0.9, t))) /
                   ((v.array() / (1.0 - std::pow(0.999, t))).sqrt() + 1e-8);
    }
    if (failed || !std::isfinite(value)) continue;
    if (!have_best || value > best_value) {
      have_best = true;
      best_value = value;
      best_w = w;
      best_trace = std::move(trace);
    }
  }
  if (!have_best) throw NumericalError("fit_ml: all restarts failed");

  Vec xi(d + 2);
  for (Index i = 0; i < d + 2; ++i) xi[i] = special::softplus(best_w[i]);

  FitResult fit;
  fit.method = Method::ml;
  fit.point = HyperParams::from_vector(xi);
  fit.trace = std::move(best_trace);
  fit.seed = cfg.seed;
  fit.x_train = train.X;
  fit.y_train = train.y;
  fit.standardization = train.standardization;
  return fit;
}

PosteriorDraws sample_posterior(const FitResult& fit, int n_draws, std::uint64_t seed) {
  if (fit.method == Method::ml)
    throw std::invalid_argument("sample_posterior: unsupported method (ml has no posterior)");
  if (n_draws < 1) throw std::invalid_argument("sample_posterior: n_draws must be >= 1");
  const Index d = fit.stack.dim;
  RandomStream rng(seed);
  PosteriorDraws draws;
  draws.xi.resize(n_draws, d);
  draws.log_q.resize(n_draws);
  for (int s = 0; s < n_draws; ++s) {
    const Vec u0 = rng.normal_vector(d);
    const flows::StackResult<double> r = flows::stack_forward<double>(u0, fit.stack);
    draws.xi.row(s) = r.xi.transpose();
    draws.log_q[s] = flows::base_log_density(u0) - r.log_det;
  }
  return draws;
}

double lpds(const FitResult& fit, const data::Dataset& test, int n_draws, std::uint64_t seed,
            Vec* per_point) {
  if (test.d() != fit.x_train.cols())
    throw std::invalid_argument("lpds: test covariate dimension mismatch");
  const Index m = test.n();
  if (m < 1) throw std::invalid_argument("lpds: empty test set");

  auto log_normal = [](double y, double mean, double var) {
    const double z = y - mean;
    return -0.5 * (kLog2Pi + std::log(var) + z * z / var);
  };

  Vec avg(m);
  if (fit.method == Method::ml) {
    const auto [mean, var] = kernel::predictive_distribution(fit.x_train, fit.y_train, test.X, fit.point);
    for (Index i = 0; i < m; ++i) avg[i] = log_normal(test.y[i], mean[i], var[i]);
  } else {
    const PosteriorDraws draws = sample_posterior(fit, n_draws, seed);
    Mat log_dens(m, n_draws);
    Index used = 0;
    for (int s = 0; s < n_draws; ++s) {
      HyperParams p = HyperParams::from_vector(draws.xi.row(s).transpose());
      try {
        const auto [mean, var] =
            kernel::predictive_distribution(fit.x_train, fit.y_train, test.X, p);
        for (Index i = 0; i < m; ++i) log_dens(i, used) = log_normal(test.y[i], mean[i], var[i]);
        ++used;
      } catch (const FactorizationError&) {
        continue;  // rejected draw
      }
    }
    if (used == 0) throw NumericalError("lpds: all posterior draws rejected");
    for (Index i = 0; i < m; ++i) {
      const double mx = log_dens.row(i).head(used).maxCoeff();
      double acc = 0.0;
      for (Index s = 0; s < used; ++s) acc += std::exp(log_dens(i, s) - mx);
      avg[i] = mx + std::log(acc) - std::log(static_cast<double>(used));
    }
  }
  if (per_point != nullptr) *per_point = avg;
  return avg.mean();
}

std::vector<InclusionRow> inclusion_summary(const PosteriorDraws& draws,
                                            const prior::TripleGammaConfig& prior_cfg) {
  prior_cfg.validate();
  if (draws.xi.rows() < 1) throw std::invalid_argument("inclusion_summary: no draws");
  const Index d = draws.xi.cols() - 2;
  if (d < 1) throw std::invalid_argument("inclusion_summary: no covariates");
  const double ref = shrinkage_reference_quantile();

  std::vector<InclusionRow> rows;
  rows.reserve(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) {
    std::vector<double> col(static_cast<std::size_t>(draws.xi.rows()));
    int below = 0;
    for (Index s = 0; s < draws.xi.rows(); ++s) {
      col[static_cast<std::size_t>(s)] = draws.xi(s, j);
      if (draws.xi(s, j) < ref) ++below;
    }
    InclusionRow row;
    row.covariate = j;
    row.median = quantile(col, 0.5);
    row.lo90 = quantile(col, 0.05);
    row.hi90 = quantile(col, 0.95);
    row.shrink_frac = static_cast<double>(below) / static_cast<double>(draws.xi.rows());
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(), [](const InclusionRow& a, const InclusionRow& b) {
    if (a.median != b.median) return a.median > b.median;
    return a.covariate < b.covariate;
  });
  return rows;
}

std::vector<std::uint8_t> save_checkpoint(const FitResult& fit) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  write_u32(out, kVersion);
  write_u8(out, static_cast<std::uint8_t>(fit.method));
  write_u64(out, fit.seed);

  write_f64(out, fit.prior_cfg.a);
  write_f64(out, fit.prior_cfg.c);
  write_f64(out, fit.prior_cfg.sigma2_rate);

  // Standardization.
  const auto& s = fit.standardization;
  write_u32(out, static_cast<std::uint32_t>(s.kept_columns.size()));
  for (Index j : s.kept_columns) write_u32(out, static_cast<std::uint32_t>(j));
  for (Index k = 0; k < static_cast<Index>(s.kept_columns.size()); ++k) {
    write_f64(out, s.col_mean[k]);
    write_f64(out, s.col_scale[k]);
    write_u8(out, s.binary_mask[static_cast<std::size_t>(k)]);
  }
  write_f64(out, s.response_center);
  write_u8(out, s.applied ? 1 : 0);

  // Training data (prediction is data-dependent).
  write_u32(out, static_cast<std::uint32_t>(fit.x_train.rows()));
  write_u32(out, static_cast<std::uint32_t>(fit.x_train.cols()));
  for (Index i = 0; i < fit.x_train.rows(); ++i)
    for (Index j = 0; j < fit.x_train.cols(); ++j) write_f64(out, fit.x_train(i, j));
  for (Index i = 0; i < fit.y_train.size(); ++i) write_f64(out, fit.y_train[i]);

  if (fit.method == Method::ml) {
    write_u32(out, static_cast<std::uint32_t>(fit.point.dim() + 2));
    const Vec xi = fit.point.to_vector();
    for (Index i = 0; i < xi.size(); ++i) write_f64(out, xi[i]);
  } else {
    write_u32(out, static_cast<std::uint32_t>(fit.stack.dim));
    write_f64(out, fit.stack.softplus_beta);
    write_u32(out, static_cast<std::uint32_t>(fit.stack.layers.size()));
    for (const auto& layer : fit.stack.layers) {
      write_u8(out, static_cast<std::uint8_t>(flows::kind_of(layer)));
      std::uint32_t width = 0;
      if (flows::kind_of(layer) == flows::LayerKind::sylvester)
        width = static_cast<std::uint32_t>(
            std::get<flows::SylvesterLayer<double>>(layer).bias.size());
      write_u32(out, width);
    }
    const Vec flat = grad::pack(fit.stack);
    write_u32(out, static_cast<std::uint32_t>(flat.size()));
    for (Index i = 0; i < flat.size(); ++i) write_f64(out, flat[i]);
  }
  return out;
}

FitResult load_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  for (std::uint8_t expected : kMagic)
    if (r.u8() != expected) throw std::runtime_error("load_checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));

  FitResult fit;
  fit.method = static_cast<Method>(r.u8());
  fit.seed = r.u64();
  fit.prior_cfg.a = r.f64();
  fit.prior_cfg.c = r.f64();
  fit.prior_cfg.sigma2_rate = r.f64();

  const std::uint32_t kept = r.u32();
  fit.standardization.kept_columns.resize(kept);
  for (std::uint32_t k = 0; k < kept; ++k)
    fit.standardization.kept_columns[k] = static_cast<Index>(r.u32());
  fit.standardization.col_mean.resize(kept);
  fit.standardization.col_scale.resize(kept);
  fit.standardization.binary_mask.resize(kept);
  for (std::uint32_t k = 0; k < kept; ++k) {
    fit.standardization.col_mean[k] = r.f64();
    fit.standardization.col_scale[k] = r.f64();
    fit.standardization.binary_mask[k] = r.u8();
  }
  fit.standardization.response_center = r.f64();
  fit.standardization.applied = r.u8() != 0;

  const std::uint32_t n = r.u32();
  const std::uint32_t d = r.u32();
  fit.x_train.resize(n, d);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < d; ++j) fit.x_train(i, j) = r.f64();
  fit.y_train.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) fit.y_train[i] = r.f64();

  if (fit.method == Method::ml) {
    const std::uint32_t dim = r.u32();
    Vec xi(dim);
    for (std::uint32_t i = 0; i < dim; ++i) xi[i] = r.f64();
    fit.point = HyperParams::from_vector(xi);
  } else {
    grad::StackLayout layout;
    layout.dim = static_cast<Index>(r.u32());
    layout.softplus_beta = r.f64();
    const std::uint32_t n_layers = r.u32();
    std::vector<grad::StackLayout::LayerSpec> specs(n_layers);
    for (std::uint32_t k = 0; k < n_layers; ++k) {
      specs[k].kind = static_cast<flows::LayerKind>(r.u8());
      specs[k].width = static_cast<Index>(r.u32());
    }
    layout.layers = specs;
    Index expected = 0;
    for (const auto& spec : specs) {
      switch (spec.kind) {
        case flows::LayerKind::diag_affine: expected += 2 * layout.dim; break;
        case flows::LayerKind::radial: expected += 2 + layout.dim; break;
        case flows::LayerKind::sylvester:
          expected += spec.width * layout.dim + spec.width * (spec.width - 1) + 3 * spec.width;
          break;
      }
    }
    const std::uint32_t count = r.u32();
    if (static_cast<Index>(count) != expected)
      throw std::runtime_error("load_checkpoint: parameter payload size mismatch");
    Vec flat(count);
    for (std::uint32_t i = 0; i < count; ++i) flat[i] = r.f64();
    layout.total = expected;
    fit.stack = grad::unpack<double>(layout, flat.data());
  }
  if (!r.exhausted()) throw std::runtime_error("load_checkpoint: trailing bytes");
  return fit;
}

void save_checkpoint_file(const FitResult& fit, const std::string& path) {
  const std::vector<std::uint8_t> bytes = save_checkpoint(fit);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint_file: cannot open " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

FitResult load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint_file: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_checkpoint(bytes);
}

}  // namespace flowgpr::model
