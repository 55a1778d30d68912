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

#include "flowgpr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include "flowgpr/data_io.hpp"
#include "flowgpr/grad_engine.hpp"
#include "flowgpr/kernel.hpp"
#include "flowgpr/param_vector.hpp"
#include "flowgpr/random.hpp"
#include "flowgpr/vi_engine.hpp"

namespace flowgpr::bench {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double iqr_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * v[lo] + w * v[std::min(lo + 1, v.size() - 1)];
  };
  return at(0.75) - at(0.25);
}

template <typename F>
std::vector<double> time_reps(int reps, F&& body) {
  body();  // warmup, excluded
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return times;
}

}  // namespace

std::string environment_fingerprint() {
  std::string cpu = "unknown-cpu";
  std::ifstream info("/proc/cpuinfo");
  std::string line;
  while (std::getline(info, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto sep = line.find(':');
      if (sep != std::string::npos) cpu = line.substr(sep + 2);
      break;
    }
  }
  std::string out = "compiler=" + std::string(__VERSION__);
  out += ";eigen=" + std::to_string(EIGEN_WORLD_VERSION) + "." +
         std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION);
#ifdef NDEBUG
  out += ";build=release";
#else
  out += ";build=debug";
#endif
  out += ";cpu=" + cpu;
  return out;
}

BenchReport bench_likelihood(const std::vector<Index>& n_values, Index d, int reps,
                             std::uint64_t seed) {
  if (n_values.empty()) throw std::invalid_argument("bench_likelihood: empty n list");
  if (reps < 5) throw std::invalid_argument("bench_likelihood: need at least 5 repetitions");
  for (std::size_t i = 1; i < n_values.size(); ++i)
    if (n_values[i] <= n_values[i - 1])
      throw std::invalid_argument("bench_likelihood: n values must be sorted ascending");

  BenchReport report;
  report.fingerprint = environment_fingerprint();

  RandomStream rng(seed);
  HyperParams params;
  params.theta = Vec::Constant(d, 0.25);
  params.tau = 2.0;
  params.sigma2 = 0.1;

  volatile double sink = 0.0;
  for (Index n : n_values) {
    Mat X(n, d);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < d; ++j) X(i, j) = rng.normal();
    Vec y(n);
    for (Index i = 0; i < n; ++i) y[i] = rng.normal();

    BenchCase c;
    c.n = n;
    c.d = d;
    c.reps = reps;
    c.times_ms = time_reps(reps, [&] { sink = kernel::log_marginal_likelihood(y, X, params); });
    c.median_ms = median_of(c.times_ms);
    c.iqr_ms = iqr_of(c.times_ms);
    report.cases.push_back(std::move(c));
  }
  (void)sink;

  // Log-log slope over the top half of the range.
  const std::size_t total = report.cases.size();
  const std::size_t start = total - std::max<std::size_t>(2, (total + 1) / 2);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = start; i < total; ++i) {
    const double x = std::log(static_cast<double>(report.cases[i].n));
    const double y_ = std::log(report.cases[i].median_ms);
    sx += x;
    sy += y_;
    sxx += x * x;
    sxy += x * y_;
    ++m;
  }
  report.loglog_slope = (static_cast<double>(m) * sxy - sx * sy) /
                        (static_cast<double>(m) * sxx - sx * sx);
  return report;
}

BenchReport bench_iteration(Index n, Index d, int s, int k, int reps, std::uint64_t seed) {
  if (reps < 5) throw std::invalid_argument("bench_iteration: need at least 5 repetitions");
  data::SimConfig sim;
  sim.d = d;
  sim.n_train = n;
  sim.n_test = 0;
  sim.sparsity = 0.5;
  sim.rho_corr = 0.0;
  sim.theta_scale_is_rate = true;
  sim.seed = derive_seed(seed, 3);
  const data::Simulated data = data::simulate(sim);

  const prior::TripleGammaConfig prior_cfg;
  const vi::GprJointTarget target(data.train.X, data.train.y, prior_cfg);

  RandomStream rng(derive_seed(seed, 4));
  flows::FlowStack stack = flows::make_stack(d + 2, k, 0, true, 1.0, rng);
  const grad::StackLayout layout = grad::layout_of(stack);
  Vec params = grad::pack(stack);

  Mat noise(s, d + 2);
  for (Index i = 0; i < noise.rows(); ++i)
    for (Index j = 0; j < noise.cols(); ++j) noise(i, j) = rng.normal();

  BenchReport report;
  report.fingerprint = environment_fingerprint();
  BenchCase c;
  c.n = n;
  c.d = d;
  c.s = s;
  c.k = k;
  c.reps = reps;

  // One full iteration: ELBO gradient plus a (throwaway) ascent step.
  c.times_ms = time_reps(reps, [&] {
    class Objective final : public grad::Objective {
     public:
      Objective(const vi::LogDensityTarget& t, const grad::StackLayout& l, const Mat& noise)
          : target_(t), layout_(l), noise_(noise) {}
      Index dim() const override { return layout_.total; }
      ad::Var evaluate(ad::Tape& tape, std::span<const ad::Var> p) const override {
        const flows::FlowStackT<ad::Var> stack = grad::unpack<ad::Var>(layout_, p.data());
        ad::Var acc(0.0);
        Vec xi(layout_.dim), g(layout_.dim);
        for (Index row = 0; row < noise_.rows(); ++row) {
          VecX<ad::Var> u0(layout_.dim);
          for (Index i = 0; i < layout_.dim; ++i) u0[i] = ad::Var(noise_(row, i));
          const auto r = flows::stack_forward(u0, stack);
          for (Index i = 0; i < layout_.dim; ++i) xi[i] = r.xi[i].value();
          const double v = target_.eval(xi, &g);
          acc += ad::custom_node(tape,
                                 std::span<const ad::Var>(r.xi.data(),
                                                          static_cast<std::size_t>(layout_.dim)),
                                 v,
                                 std::span<const double>(g.data(),
                                                         static_cast<std::size_t>(layout_.dim))) +
                 r.log_det;
        }
        return acc / static_cast<double>(noise_.rows());
      }

     private:
      const vi::LogDensityTarget& target_;
      const grad::StackLayout& layout_;
      const Mat& noise_;
    } objective(target, layout, noise);

    const grad::GradResult g = grad::objective_gradient(objective, params);
    Vec stepped = params + 1e-3 * g.grad;
    (void)stepped;
  });
  c.median_ms = median_of(c.times_ms);
  c.iqr_ms = iqr_of(c.times_ms);
  report.cases.push_back(std::move(c));
  return report;
}

void write_report(const BenchReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_report: cannot open " + path);
  out << "n,d,s,k,reps,median_ms,iqr_ms\n";
  for (const auto& c : report.cases)
    out << c.n << ',' << c.d << ',' << c.s << ',' << c.k << ',' << c.reps << ','
        << data::format_double(c.median_ms) << ',' << data::format_double(c.iqr_ms) << '\n';
}

}  // namespace flowgpr::bench
