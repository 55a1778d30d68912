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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "flowgpr/bench.hpp"
#include "flowgpr/data_io.hpp"
#include "flowgpr/manifest.hpp"
#include "flowgpr/model_api.hpp"
#include "flowgpr/random.hpp"
#include "flowgpr/shrinkage_prior.hpp"

namespace fs = std::filesystem;
using namespace flowgpr;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
  return buf;
}

manifest::RunManifest start_manifest(const std::string& command, const std::string& args,
                                     std::uint64_t seed) {
  manifest::RunManifest m;
  m.set("command", command);
  m.set("args", args);
  m.set("version", kVersion);
  m.set("seed", std::to_string(seed));
  m.set("started_at", timestamp());
  return m;
}

void finish_manifest(manifest::RunManifest& m, const std::string& dir) {
  m.set("finished_at", timestamp());
  manifest::write_manifest(m, dir + "/manifest.txt");
}

std::string join_args(int argc, char** argv) {
  std::string out;
  for (int i = 1; i < argc; ++i) {
    if (i > 1) out += ' ';
    out += argv[i];
  }
  return out;
}

struct FitFlags {
  std::string method = "nf";
  std::string train_path;
  std::string response = "y";
  double a = 0.1, c = 0.1, sigma2_rate = 10.0;
  int layers = 10, mc_samples = 10, iterations = 3000;
  double learning_rate = 5e-3;
  int width = 0;
  double softplus_beta = 1.0;
  int restarts = 10;
  std::uint64_t seed = 0;
  bool standardize = true;
  std::string out_dir;
};

model::FitResult run_fit(const FitFlags& f, const data::Dataset& train) {
  prior::TripleGammaConfig prior_cfg;
  prior_cfg.a = f.a;
  prior_cfg.c = f.c;
  prior_cfg.sigma2_rate = f.sigma2_rate;

  const model::Method method = model::method_from_name(f.method);
  if (method == model::Method::ml) {
    model::MlConfig cfg;
    cfg.n_restarts = f.restarts;
    cfg.n_iterations = std::min(f.iterations, 1000);
    cfg.seed = f.seed;
    return model::fit_ml(train, cfg);
  }
  vi::VIConfig cfg;
  cfg.n_layers = f.layers;
  cfg.n_mc_samples = f.mc_samples;
  cfg.n_iterations = f.iterations;
  cfg.learning_rate = f.learning_rate;
  cfg.sylvester_width = f.width;
  cfg.softplus_beta = f.softplus_beta;
  cfg.seed = f.seed;
  return method == model::Method::nf ? model::fit_nf(train, prior_cfg, cfg)
                                     : model::fit_mf(train, prior_cfg, cfg);
}

void write_trace(const model::FitResult& fit, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "iteration,objective,smoothed\n";
  for (std::size_t i = 0; i < fit.trace.size(); ++i) {
    out << i + 1 << ',' << data::format_double(fit.trace[i]) << ',';
    out << data::format_double(i < fit.trace_smoothed.size() ? fit.trace_smoothed[i]
                                                             : fit.trace[i]);
    out << '\n';
  }
}

void write_inclusion(const model::FitResult& fit, const std::string& path) {
  const model::PosteriorDraws draws =
      model::sample_posterior(fit, 512, derive_seed(fit.seed, 77));
  const auto rows = model::inclusion_summary(draws, fit.prior_cfg);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "covariate,original_column,median,lo90,hi90,shrink_frac\n";
  for (const auto& r : rows) {
    const auto& kept = fit.standardization.kept_columns;
    const Index original = static_cast<std::size_t>(r.covariate) < kept.size()
                               ? kept[static_cast<std::size_t>(r.covariate)]
                               : r.covariate;
    out << r.covariate << ',' << original << ',' << data::format_double(r.median) << ','
        << data::format_double(r.lo90) << ',' << data::format_double(r.hi90) << ','
        << data::format_double(r.shrink_frac) << '\n';
  }
}

int cmd_simulate(const data::SimConfig& cfg, const std::string& out_dir,
                 const std::string& args) {
  fs::create_directories(out_dir);
  const data::Simulated sim = data::simulate(cfg);
  data::write_table(out_dir + "/train.csv", sim.train.X, sim.train.y, sim.train.feature_names);
  data::write_table(out_dir + "/test.csv", sim.test.X, sim.test.y, sim.test.feature_names);

  std::ofstream truth(out_dir + "/truth.csv");
  truth << "parameter,value\n";
  for (Index j = 0; j < sim.truth.theta.size(); ++j)
    truth << "theta" << j + 1 << ',' << data::format_double(sim.truth.theta[j]) << '\n';
  truth << "tau," << data::format_double(sim.truth.tau) << '\n';
  truth << "noise_var," << data::format_double(sim.truth.noise_var) << '\n';
  truth.close();

  manifest::RunManifest m = start_manifest("simulate", args, cfg.seed);
  m.set("d", std::to_string(cfg.d));
  m.set("n_train", std::to_string(cfg.n_train));
  m.set("n_test", std::to_string(cfg.n_test));
  m.set("sparsity", data::format_double(cfg.sparsity));
  m.set("rho", data::format_double(cfg.rho_corr));
  manifest::add_output(m, out_dir, "train.csv");
  manifest::add_output(m, out_dir, "test.csv");
  manifest::add_output(m, out_dir, "truth.csv");
  finish_manifest(m, out_dir);
  std::cout << "wrote " << out_dir << "/train.csv test.csv truth.csv\n";
  return 0;
}

int cmd_fit(const FitFlags& f, const std::string& args) {
  fs::create_directories(f.out_dir);
  data::Dataset train = data::load_table(f.train_path, f.response);
  if (f.standardize) train = data::preprocess(train);

  const model::FitResult fit = run_fit(f, train);
  model::save_checkpoint_file(fit, f.out_dir + "/checkpoint.bin");
  write_trace(fit, f.out_dir + "/trace.csv");
  if (fit.method != model::Method::ml) write_inclusion(fit, f.out_dir + "/inclusion.csv");

  manifest::RunManifest m = start_manifest("fit", args, f.seed);
  m.set("method", f.method);
  m.set("a", data::format_double(f.a));
  m.set("c", data::format_double(f.c));
  m.set("sigma2_rate", data::format_double(f.sigma2_rate));
  m.set("n", std::to_string(train.n()));
  m.set("d", std::to_string(train.d()));
  if (fit.method != model::Method::ml) {
    m.set("rejected_samples", std::to_string(fit.rejected_samples));
    m.set("plateau", fit.plateau ? std::to_string(fit.plateau_iteration) : "none");
  }
  manifest::add_output(m, f.out_dir, "checkpoint.bin");
  manifest::add_output(m, f.out_dir, "trace.csv");
  if (fit.method != model::Method::ml) manifest::add_output(m, f.out_dir, "inclusion.csv");
  finish_manifest(m, f.out_dir);
  if (!fit.trace.empty())
    std::cout << "final objective " << data::format_double(fit.trace.back()) << '\n';
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& test_path,
             const std::string& response, int n_draws, std::uint64_t seed,
             const std::string& out_dir, const std::string& args) {
  const model::FitResult fit = model::load_checkpoint_file(checkpoint_path);
  data::Dataset test = data::load_table(test_path, response);
  if (fit.standardization.applied)
    test = data::apply_standardization(test, fit.standardization);
  if (test.d() != fit.x_train.cols())
    throw NumericalError("eval: test dimension " + std::to_string(test.d()) +
                         " does not match checkpoint dimension " +
                         std::to_string(fit.x_train.cols()));

  Vec per_point;
  const double score = model::lpds(fit, test, n_draws, seed, &per_point);
  std::cout << "lpds " << data::format_double(score) << '\n';
  for (Index i = 0; i < per_point.size(); ++i)
    std::cout << i << ' ' << data::format_double(per_point[i]) << '\n';

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::vector<Vec> cols(2);
    cols[0].resize(per_point.size());
    for (Index i = 0; i < per_point.size(); ++i) cols[0][i] = static_cast<double>(i);
    cols[1] = per_point;
    data::write_columns(out_dir + "/lpds.csv", {"point", "log_density"}, cols);
    manifest::RunManifest m = start_manifest("eval", args, seed);
    m.set("lpds", data::format_double(score));
    manifest::add_output(m, out_dir, "lpds.csv");
    finish_manifest(m, out_dir);
  }
  return 0;
}

// --- grid -------------------------------------------------------------------

struct GridSpec {
  std::vector<Index> d_values{10};
  std::vector<Index> n_values{100};
  Index n_test = 100;
  std::vector<double> sparsity_values{0.5};
  std::vector<double> rho_values{0.5};
  std::vector<std::string> methods{"nf", "ml"};
  double a = 0.1, c = 0.1, sigma2_rate = 10.0;
  int layers = 10, mc_samples = 10, iterations = 400;
  double learning_rate = 5e-3;
  int restarts = 10;
  int eval_draws = 128;
  bool theta_scale_is_rate = false;
  std::uint64_t base_seed = 1;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

GridSpec parse_grid_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("grid: cannot open spec file " + path);
  GridSpec spec;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto sep = line.find('=');
    if (sep == std::string::npos)
      throw std::runtime_error("grid: malformed spec line '" + line + "'");
    std::string key = line.substr(0, sep);
    std::string value = line.substr(sep + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    key.erase(0, key.find_first_not_of(" \t"));
    value.erase(0, value.find_first_not_of(" \t"));

    const auto items = split_list(value);
    auto as_idx = [&] {
      std::vector<Index> v;
      for (const auto& s : items) v.push_back(std::stol(s));
      return v;
    };
    auto as_dbl = [&] {
      std::vector<double> v;
      for (const auto& s : items) v.push_back(std::stod(s));
      return v;
    };
    if (key == "d") spec.d_values = as_idx();
    else if (key == "n_train") spec.n_values = as_idx();
    else if (key == "n_test") spec.n_test = std::stol(value);
    else if (key == "sparsity") spec.sparsity_values = as_dbl();
    else if (key == "rho") spec.rho_values = as_dbl();
    else if (key == "methods") spec.methods = items;
    else if (key == "a") spec.a = std::stod(value);
    else if (key == "c") spec.c = std::stod(value);
    else if (key == "sigma2_rate") spec.sigma2_rate = std::stod(value);
    else if (key == "layers") spec.layers = std::stoi(value);
    else if (key == "mc_samples") spec.mc_samples = std::stoi(value);
    else if (key == "iterations") spec.iterations = std::stoi(value);
    else if (key == "learning_rate") spec.learning_rate = std::stod(value);
    else if (key == "restarts") spec.restarts = std::stoi(value);
    else if (key == "eval_draws") spec.eval_draws = std::stoi(value);
    else if (key == "theta_scale_is_rate")
      spec.theta_scale_is_rate = (value == "true" || value == "1");
    else if (key == "base_seed") spec.base_seed = std::stoull(value);
    else throw std::runtime_error("grid: unknown spec key '" + key + "'");
  }
  return spec;
}

struct GridRow {
  Index d = 0, n = 0;
  double sparsity = 0.0, rho = 0.0;
  std::string method;
  int replication = 0;
  std::uint64_t seed = 0;
  std::string tag;
};

int cmd_grid(const std::string& spec_path, int replications, int workers,
             const std::string& out_dir, const std::string& args) {
  const GridSpec spec = parse_grid_spec(spec_path);
  fs::create_directories(out_dir + "/rows");

  std::vector<GridRow> rows;
  for (Index d : spec.d_values)
    for (Index n : spec.n_values)
      for (double s : spec.sparsity_values)
        for (double rho : spec.rho_values)
          for (const auto& method : spec.methods)
            for (int rep = 0; rep < replications; ++rep) {
              GridRow row;
              row.d = d;
              row.n = n;
              row.sparsity = s;
              row.rho = rho;
              row.method = method;
              row.replication = rep;
              std::ostringstream tag;
              tag << "d" << d << "_n" << n << "_s" << s << "_rho" << rho << "_" << method
                  << "_rep" << rep;
              row.tag = tag.str();
              // Seed depends only on the configuration, not on worker order.
              std::uint64_t h = spec.base_seed;
              for (char ch : row.tag) h = derive_seed(h, static_cast<std::uint64_t>(ch));
              row.seed = h;
              rows.push_back(row);
            }

  std::mutex io_mutex;
  std::size_t next = 0;
  long completed = 0, skipped = 0, failed = 0;

  auto run_row = [&](const GridRow& row) {
    const std::string row_path = out_dir + "/rows/row_" + row.tag + ".csv";
    if (fs::exists(row_path)) {
      std::lock_guard<std::mutex> lock(io_mutex);
      ++skipped;
      return;
    }
    std::string status = "ok";
    double score = std::numeric_limits<double>::quiet_NaN();
    double wall_s = 0.0;
    try {
      const auto t0 = std::chrono::steady_clock::now();
      data::SimConfig sim;
      sim.d = row.d;
      sim.n_train = row.n;
      sim.n_test = spec.n_test;
      sim.sparsity = row.sparsity;
      sim.rho_corr = row.rho;
      sim.theta_scale_is_rate = spec.theta_scale_is_rate;
      sim.seed = row.seed;
      const data::Simulated sd = data::simulate(sim);

      FitFlags f;
      f.method = row.method;
      f.a = spec.a;
      f.c = spec.c;
      f.sigma2_rate = spec.sigma2_rate;
      f.layers = spec.layers;
      f.mc_samples = spec.mc_samples;
      f.iterations = spec.iterations;
      f.learning_rate = spec.learning_rate;
      f.restarts = spec.restarts;
      f.seed = derive_seed(row.seed, 5);
      const model::FitResult fit = run_fit(f, sd.train);
      score = model::lpds(fit, sd.test, spec.eval_draws, derive_seed(row.seed, 6));
      const auto t1 = std::chrono::steady_clock::now();
      wall_s = std::chrono::duration<double>(t1 - t0).count();
    } catch (const std::exception& e) {
      status = std::string("failed: ") + e.what();
    }
    std::ostringstream line;
    line << row.d << ',' << row.n << ',' << data::format_double(row.sparsity) << ','
         << data::format_double(row.rho) << ',' << row.method << ',' << row.replication << ','
         << row.seed << ',' << data::format_double(score) << ','
         << data::format_double(wall_s) << ',' << status << '\n';
    const std::string tmp = row_path + ".tmp";
    {
      std::ofstream out(tmp);
      out << "d,n_train,sparsity,rho,method,replication,seed,lpds,wall_s,status\n" << line.str();
    }
    fs::rename(tmp, row_path);
    std::lock_guard<std::mutex> lock(io_mutex);
    if (status == "ok")
      ++completed;
    else
      ++failed;
    std::cerr << "grid row " << row.tag << ": " << status << '\n';
  };

  auto worker = [&] {
    for (;;) {
      std::size_t mine;
      {
        std::lock_guard<std::mutex> lock(io_mutex);
        if (next >= rows.size()) return;
        mine = next++;
      }
      run_row(rows[mine]);
    }
  };

  if (workers < 1) workers = 1;
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Index assembled from the per-row files (covers resumed runs too).
  std::ofstream index(out_dir + "/grid_results.csv");
  index << "d,n_train,sparsity,rho,method,replication,seed,lpds,wall_s,status\n";
  for (const auto& row : rows) {
    std::ifstream in(out_dir + "/rows/row_" + row.tag + ".csv");
    if (!in) continue;
    std::string header, line;
    std::getline(in, header);
    while (std::getline(in, line)) index << line << '\n';
  }
  index.close();

  manifest::RunManifest m = start_manifest("grid", args, spec.base_seed);
  m.set("rows_total", std::to_string(rows.size()));
  m.set("rows_completed", std::to_string(completed));
  m.set("rows_skipped", std::to_string(skipped));
  m.set("rows_failed", std::to_string(failed));
  manifest::add_output(m, out_dir, "grid_results.csv");
  finish_manifest(m, out_dir);
  std::cout << "grid finished: " << completed << " completed, " << skipped << " skipped, "
            << failed << " failed\n";
  return 0;
}

int cmd_prior_study(double a, double c, const std::vector<Index>& d_values, int draws,
                    int inner, bool hierarchical, std::uint64_t seed,
                    const std::string& out_dir, const std::string& args) {
  fs::create_directories(out_dir);
  prior::TripleGammaConfig cfg;
  cfg.a = a;
  cfg.c = c;
  const double tau_fixed = prior::tau_prior_median(cfg);

  manifest::RunManifest m = start_manifest("prior-study", args, seed);
  m.set("a", data::format_double(a));
  m.set("c", data::format_double(c));
  m.set("hierarchical", hierarchical ? "true" : "false");
  m.set("tau_fixed", data::format_double(tau_fixed));

  for (Index d : d_values) {
    Vec sum_theta(draws);
    for (int i = 0; i < draws; ++i) {
      const prior::PriorDraw pd = prior::sample_hierarchy(
          d, cfg, hierarchical, hierarchical ? std::nullopt : std::optional<double>(tau_fixed),
          derive_seed(seed, 10000 + static_cast<std::uint64_t>(i)));
      sum_theta[i] = pd.theta.sum();
    }
    const std::string sum_name = "sum_theta_d" + std::to_string(d) + ".csv";
    data::write_columns(out_dir + "/" + sum_name, {"sum_theta"}, {sum_theta});
    manifest::add_output(m, out_dir, sum_name);

    const prior::PriorStudy study = prior::prior_model_size_study(
        d, cfg, draws, inner, hierarchical,
        hierarchical ? std::nullopt : std::optional<double>(tau_fixed), derive_seed(seed, 999));
    Vec k(static_cast<Index>(study.k.size()));
    for (std::size_t i = 0; i < study.k.size(); ++i)
      k[static_cast<Index>(i)] = static_cast<double>(study.k[i]);
    const std::string pik_name = "pi_k_d" + std::to_string(d) + ".csv";
    data::write_columns(out_dir + "/" + pik_name, {"pi", "k"}, {study.pi, k});
    manifest::add_output(m, out_dir, pik_name);
  }
  finish_manifest(m, out_dir);
  std::cout << "prior study written to " << out_dir << '\n';
  return 0;
}

int cmd_bench_likelihood(const std::vector<Index>& n_values, Index d, int reps,
                         std::uint64_t seed, const std::string& out_dir,
                         const std::string& args) {
  const bench::BenchReport report = bench::bench_likelihood(n_values, d, reps, seed);
  std::cout << "loglog_slope " << data::format_double(report.loglog_slope) << '\n';
  for (const auto& c : report.cases)
    std::cout << "n=" << c.n << " median_ms=" << data::format_double(c.median_ms) << '\n';
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    bench::write_report(report, out_dir + "/bench_likelihood.csv");
    manifest::RunManifest m = start_manifest("bench-likelihood", args, seed);
    m.set("fingerprint", report.fingerprint);
    m.set("loglog_slope", data::format_double(report.loglog_slope));
    manifest::add_output(m, out_dir, "bench_likelihood.csv");
    finish_manifest(m, out_dir);
  }
  return 0;
}

int cmd_bench_iteration(Index n, Index d, int s, int k, int reps, std::uint64_t seed,
                        const std::string& out_dir, const std::string& args) {
  const bench::BenchReport report = bench::bench_iteration(n, d, s, k, reps, seed);
  for (const auto& c : report.cases)
    std::cout << "n=" << c.n << " d=" << c.d << " s=" << c.s << " k=" << c.k
              << " median_ms=" << data::format_double(c.median_ms) << '\n';
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    bench::write_report(report, out_dir + "/bench_iteration.csv");
    manifest::RunManifest m = start_manifest("bench-iteration", args, seed);
    m.set("fingerprint", report.fingerprint);
    manifest::add_output(m, out_dir, "bench_iteration.csv");
    finish_manifest(m, out_dir);
  }
  return 0;
}

int cmd_verify(const std::string& dir) {
  const manifest::RunManifest m = manifest::read_manifest(dir + "/manifest.txt");
  const manifest::VerifyResult result = manifest::verify_outputs(m, dir);
  if (result.ok) {
    std::cout << "manifest ok\n";
    return 0;
  }
  for (const auto& p : result.problems) std::cerr << p << '\n';
  return kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian process regression with shrinkage priors and flow-based "
               "variational inference"};
  app.require_subcommand(1);
  const std::string args = join_args(argc, argv);

  // simulate
  data::SimConfig sim;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "generate synthetic data");
  simulate->add_option("--d", sim.d, "number of covariates")->required();
  simulate->add_option("--n-train", sim.n_train, "training rows")->required();
  simulate->add_option("--n-test", sim.n_test, "test rows (default 300)");
  simulate->add_option("--sparsity", sim.sparsity, "fraction of zeroed weights")->required();
  simulate->add_option("--rho", sim.rho_corr, "covariate equicorrelation")->required();
  simulate->add_option("--tau", sim.tau_true, "kernel scale (default 2)");
  simulate->add_option("--noise", sim.noise_var, "noise variance (default 0.1)");
  simulate->add_option("--theta-shape", sim.theta_shape, "weight gamma shape (default 6)");
  simulate->add_option("--theta-scale", sim.theta_scale, "weight gamma scale (default 24)");
  simulate->add_flag("--theta-scale-is-rate", sim.theta_scale_is_rate,
                     "interpret --theta-scale as a rate");
  simulate->add_option("--seed", sim.seed, "rng seed")->required();
  simulate->add_option("--out-dir", sim_out, "output directory")->required();

  // fit
  FitFlags fitf;
  auto* fit = app.add_subcommand("fit", "fit a model to a training table");
  fit->add_option("--method", fitf.method, "nf, mf or ml")->required();
  fit->add_option("--train", fitf.train_path, "training table path")->required();
  fit->add_option("--response", fitf.response, "response column name (default y)");
  fit->add_option("--a", fitf.a, "prior pole parameter")->check(CLI::PositiveNumber);
  fit->add_option("--c", fitf.c, "prior tail parameter")->check(CLI::PositiveNumber);
  fit->add_option("--sigma2-rate", fitf.sigma2_rate, "exponential prior rate on sigma2")
      ->check(CLI::PositiveNumber);
  fit->add_option("--layers", fitf.layers, "sylvester layers (default 10)");
  fit->add_option("--mc-samples", fitf.mc_samples, "Monte Carlo samples per iteration");
  fit->add_option("--iterations", fitf.iterations, "optimizer iterations");
  fit->add_option("--learning-rate", fitf.learning_rate, "optimizer step size");
  fit->add_option("--width", fitf.width, "sylvester bottleneck width (0 = auto)");
  fit->add_option("--softplus-beta", fitf.softplus_beta, "softplus sharpness");
  fit->add_option("--restarts", fitf.restarts, "ml restarts (default 10)");
  fit->add_option("--seed", fitf.seed, "rng seed")->required();
  fit->add_option("--out-dir", fitf.out_dir, "output directory")->required();
  fit->add_flag("--standardize,!--no-standardize", fitf.standardize,
                "preprocess the training table (default on)");

  // eval
  std::string eval_checkpoint, eval_test, eval_out, eval_response = "y";
  int eval_draws = 256;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "log predictive density on a test table");
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint path")->required();
  eval->add_option("--test", eval_test, "test table path")->required();
  eval->add_option("--response", eval_response, "response column name (default y)");
  eval->add_option("--draws", eval_draws, "posterior draws (default 256)");
  eval->add_option("--seed", eval_seed, "rng seed")->required();
  eval->add_option("--out-dir", eval_out, "optional output directory");

  // grid
  std::string grid_spec, grid_out;
  int grid_reps = 10, grid_workers = 0;
  auto* grid = app.add_subcommand("grid", "run a simulation grid");
  grid->add_option("--spec", grid_spec, "grid spec file")->required();
  grid->add_option("--replications", grid_reps, "replications per cell");
  grid->add_option("--workers", grid_workers, "parallel workers (default FLOWGPR_WORKERS or 1)");
  grid->add_option("--out-dir", grid_out, "output directory")->required();

  // prior-study
  double ps_a = 0.1, ps_c = 0.1;
  std::vector<Index> ps_d{10, 50, 200};
  int ps_draws = 10000, ps_inner = 2000;
  bool ps_fixed_tau = false;
  std::uint64_t ps_seed = 0;
  std::string ps_out;
  auto* ps = app.add_subcommand("prior-study", "prior draws of sum(theta), pi and model size");
  ps->add_option("--a", ps_a, "prior pole parameter")->check(CLI::PositiveNumber);
  ps->add_option("--c", ps_c, "prior tail parameter")->check(CLI::PositiveNumber);
  ps->add_option("--d", ps_d, "covariate counts (default 10 50 200)");
  ps->add_option("--draws", ps_draws, "outer draws (default 10000)");
  ps->add_option("--inner", ps_inner, "inner draws for pi (default 2000)");
  ps->add_flag("--fixed-tau", ps_fixed_tau, "fix tau at its prior median (non-hierarchical)");
  ps->add_option("--seed", ps_seed, "rng seed")->required();
  ps->add_option("--out-dir", ps_out, "output directory")->required();

  // bench-likelihood
  std::vector<Index> bl_n{200, 400, 800, 1600};
  Index bl_d = 25;
  int bl_reps = 7;
  std::uint64_t bl_seed = 0;
  std::string bl_out;
  auto* bl = app.add_subcommand("bench-likelihood", "likelihood scaling benchmark");
  bl->add_option("--n", bl_n, "sample sizes, ascending");
  bl->add_option("--d", bl_d, "covariates (default 25)");
  bl->add_option("--reps", bl_reps, "repetitions (default 7, min 5)");
  bl->add_option("--seed", bl_seed, "rng seed");
  bl->add_option("--out-dir", bl_out, "optional output directory");

  // bench-iteration
  Index bi_n = 200, bi_d = 10;
  int bi_s = 10, bi_k = 10, bi_reps = 7;
  std::uint64_t bi_seed = 0;
  std::string bi_out;
  auto* bi = app.add_subcommand("bench-iteration", "per-iteration cost benchmark");
  bi->add_option("--n", bi_n, "sample size");
  bi->add_option("--d", bi_d, "covariates");
  bi->add_option("--mc-samples", bi_s, "Monte Carlo samples");
  bi->add_option("--layers", bi_k, "flow layers");
  bi->add_option("--reps", bi_reps, "repetitions (default 7, min 5)");
  bi->add_option("--seed", bi_seed, "rng seed");
  bi->add_option("--out-dir", bi_out, "optional output directory");

  // verify
  std::string verify_dir;
  auto* verify = app.add_subcommand("verify", "re-check manifest/output consistency");
  verify->add_option("--dir", verify_dir, "directory containing manifest.txt")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, sim_out, args);
    if (fit->parsed()) return cmd_fit(fitf, args);
    if (eval->parsed())
      return cmd_eval(eval_checkpoint, eval_test, eval_response, eval_draws, eval_seed,
                      eval_out, args);
    if (grid->parsed()) {
      if (grid_workers <= 0) {
        const char* env = std::getenv("FLOWGPR_WORKERS");
        grid_workers = env != nullptr ? std::max(1, std::atoi(env)) : 1;
      }
      return cmd_grid(grid_spec, grid_reps, grid_workers, grid_out, args);
    }
    if (ps->parsed())
      return cmd_prior_study(ps_a, ps_c, ps_d, ps_draws, ps_inner, !ps_fixed_tau, ps_seed,
                             ps_out, args);
    if (bl->parsed()) return cmd_bench_likelihood(bl_n, bl_d, bl_reps, bl_seed, bl_out, args);
    if (bi->parsed())
      return cmd_bench_iteration(bi_n, bi_d, bi_s, bi_k, bi_reps, bi_seed, bi_out, args);
    if (verify->parsed()) return cmd_verify(verify_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
