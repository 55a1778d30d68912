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

#include "flowgpr/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "flowgpr/kernel.hpp"
#include "flowgpr/random.hpp"

namespace flowgpr::data {

namespace {

Standardization identity_standardization(Index d) {
  Standardization s;
  s.kept_columns.resize(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) s.kept_columns[static_cast<std::size_t>(j)] = j;
  s.col_mean = Vec::Zero(d);
  s.col_scale = Vec::Ones(d);
  s.binary_mask.assign(static_cast<std::size_t>(d), 0);
  s.response_center = 0.0;
  s.applied = false;
  return s;
}

bool is_binary_column(const Mat& X, Index j) {
  double first = X(0, j);
  bool second_seen = false;
  double second = 0.0;
  for (Index i = 1; i < X.rows(); ++i) {
    const double v = X(i, j);
    if (v == first) continue;
    if (!second_seen) {
      second = v;
      second_seen = true;
    } else if (v != second) {
      return false;
    }
  }
  return second_seen;  // exactly two distinct values
}

double parse_cell(const std::string& cell, Index row, Index col) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end != begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
  double value = 0.0;
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end)
    throw ParseError("load_table: non-numeric cell at row " + std::to_string(row + 1) +
                     ", column " + std::to_string(col + 1));
  return value;
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == delimiter) {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  if (!cells.empty() && !cells.back().empty() && cells.back().back() == '\r')
    cells.back().pop_back();
  return cells;
}

}  // namespace

Simulated simulate(const SimConfig& cfg) {
  cfg.validate();
  RandomStream rng(cfg.seed);

  // Sparse positive weights.
  const double scale = cfg.theta_scale_is_rate ? 1.0 / cfg.theta_scale : cfg.theta_scale;
  Vec theta(cfg.d);
  for (Index j = 0; j < cfg.d; ++j) theta[j] = rng.gamma(cfg.theta_shape, scale);
  const Index n_zero = static_cast<Index>(std::floor(cfg.sparsity * static_cast<double>(cfg.d)));
  std::vector<Index> order(static_cast<std::size_t>(cfg.d));
  for (Index j = 0; j < cfg.d; ++j) order[static_cast<std::size_t>(j)] = j;
  rng.shuffle(order);
  for (Index j = 0; j < n_zero; ++j) theta[order[static_cast<std::size_t>(j)]] = 0.0;

  // Equicorrelated covariates: x_ij = sqrt(rho) g_i + sqrt(1 - rho) e_ij.
  const Index n_all = cfg.n_train + cfg.n_test;
  const double sr = std::sqrt(cfg.rho_corr);
  const double se = std::sqrt(1.0 - cfg.rho_corr);
  Mat X(n_all, cfg.d);
  for (Index i = 0; i < n_all; ++i) {
    const double g = rng.normal();
    for (Index j = 0; j < cfg.d; ++j) X(i, j) = sr * g + se * rng.normal();
  }

  // One joint response draw across train and test rows.
  HyperParams p;
  p.theta = theta;
  p.tau = cfg.tau_true;
  p.sigma2 = cfg.noise_var;
  const Mat C = kernel::build_covariance(X, p, 0.0);
  const kernel::KernelMatrixFactor f = kernel::factorize_auto(C);
  Vec z(n_all);
  for (Index i = 0; i < n_all; ++i) z[i] = rng.normal();
  const Vec y_all = f.chol_lower * z;

  std::vector<std::string> names(static_cast<std::size_t>(cfg.d));
  for (Index j = 0; j < cfg.d; ++j) names[static_cast<std::size_t>(j)] = "x" + std::to_string(j + 1);

  Simulated out;
  out.train.X = X.topRows(cfg.n_train);
  out.train.y = y_all.head(cfg.n_train);
  out.train.feature_names = names;
  out.train.standardization = identity_standardization(cfg.d);
  out.test.X = X.bottomRows(cfg.n_test);
  out.test.y = y_all.tail(cfg.n_test);
  out.test.feature_names = names;
  out.test.standardization = identity_standardization(cfg.d);
  out.truth.theta = theta;
  out.truth.tau = cfg.tau_true;
  out.truth.noise_var = cfg.noise_var;
  return out;
}

Dataset load_table(const std::string& path, const std::string& response_column, char delimiter) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_table: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("load_table: empty file " + path);
  const std::vector<std::string> header = split_line(line, delimiter);

  Index response_idx = -1;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == response_column) response_idx = static_cast<Index>(j);
  if (response_idx < 0)
    throw ParseError("load_table: response column '" + response_column + "' not found");

  const Index n_cols = static_cast<Index>(header.size());
  std::vector<std::vector<double>> rows;
  Index row_idx = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line, delimiter);
    if (static_cast<Index>(cells.size()) != n_cols)
      throw ParseError("load_table: ragged row " + std::to_string(row_idx + 2) + " (" +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(n_cols) + ")");
    std::vector<double> row(static_cast<std::size_t>(n_cols));
    for (Index j = 0; j < n_cols; ++j)
      row[static_cast<std::size_t>(j)] = parse_cell(cells[static_cast<std::size_t>(j)], row_idx + 1, j);
    rows.push_back(std::move(row));
    ++row_idx;
  }
  if (rows.empty()) throw ParseError("load_table: no data rows in " + path);

  Dataset ds;
  const Index n = static_cast<Index>(rows.size());
  const Index d = n_cols - 1;
  ds.X.resize(n, d);
  ds.y.resize(n);
  ds.feature_names.reserve(static_cast<std::size_t>(d));
  for (Index j = 0; j < n_cols; ++j)
    if (j != response_idx) ds.feature_names.push_back(header[static_cast<std::size_t>(j)]);
  for (Index i = 0; i < n; ++i) {
    Index jj = 0;
    for (Index j = 0; j < n_cols; ++j) {
      const double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (j == response_idx)
        ds.y[i] = v;
      else
        ds.X(i, jj++) = v;
    }
  }
  ds.standardization = identity_standardization(d);
  for (Index j = 0; j < d; ++j)
    ds.standardization.binary_mask[static_cast<std::size_t>(j)] = is_binary_column(ds.X, j) ? 1 : 0;
  return ds;
}

namespace {

Standardization fit_standardization(const Dataset& raw) {
  const Index n = raw.n();
  Standardization s;
  for (Index j = 0; j < raw.d(); ++j) {
    const double mn = raw.X.col(j).minCoeff();
    const double mx = raw.X.col(j).maxCoeff();
    if (mn == mx) continue;  // zero variance: drop
    s.kept_columns.push_back(j);
  }
  if (s.kept_columns.empty())
    throw EmptyDesignError("preprocess: all covariate columns dropped");

  const Index kept = static_cast<Index>(s.kept_columns.size());
  s.col_mean = Vec::Zero(kept);
  s.col_scale = Vec::Ones(kept);
  s.binary_mask.assign(static_cast<std::size_t>(kept), 0);
  for (Index k = 0; k < kept; ++k) {
    const Index j = s.kept_columns[static_cast<std::size_t>(k)];
    if (is_binary_column(raw.X, j)) {
      s.binary_mask[static_cast<std::size_t>(k)] = 1;
      continue;
    }
    const double mean = raw.X.col(j).mean();
    const double sd = std::sqrt((raw.X.col(j).array() - mean).square().sum() /
                                static_cast<double>(n - 1));
    s.col_mean[k] = mean;
    s.col_scale[k] = sd;
  }
  s.response_center = raw.y.mean();
  s.applied = true;
  return s;
}

}  // namespace

Dataset apply_standardization(const Dataset& raw, const Standardization& s) {
  const Index kept = static_cast<Index>(s.kept_columns.size());
  Dataset out;
  out.X.resize(raw.n(), kept);
  out.feature_names.reserve(static_cast<std::size_t>(kept));
  for (Index k = 0; k < kept; ++k) {
    const Index j = s.kept_columns[static_cast<std::size_t>(k)];
    if (j >= raw.d()) throw std::invalid_argument("apply_standardization: column out of range");
    out.X.col(k) = (raw.X.col(j).array() - s.col_mean[k]) / s.col_scale[k];
    if (!raw.feature_names.empty())
      out.feature_names.push_back(raw.feature_names[static_cast<std::size_t>(j)]);
  }
  out.y = raw.y.array() - s.response_center;
  out.standardization = s;
  return out;
}

Dataset preprocess(const Dataset& raw) {
  if (raw.n() < 2) throw std::invalid_argument("preprocess: need at least two rows");
  const Standardization s = fit_standardization(raw);
  return apply_standardization(raw, s);
}

std::vector<Fold> kfold(const Dataset& raw, int k, std::uint64_t seed) {
  const Index n = raw.n();
  if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
  if (static_cast<Index>(k) > n) throw std::invalid_argument("kfold: k exceeds the number of rows");

  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  RandomStream rng(seed);
  rng.shuffle(order);

  std::vector<std::vector<Index>> assignments(static_cast<std::size_t>(k));
  for (Index i = 0; i < n; ++i)
    assignments[static_cast<std::size_t>(i % k)].push_back(order[static_cast<std::size_t>(i)]);

  auto take_rows = [&](const std::vector<Index>& idx) {
    Dataset ds;
    ds.X.resize(static_cast<Index>(idx.size()), raw.d());
    ds.y.resize(static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      ds.X.row(static_cast<Index>(i)) = raw.X.row(idx[i]);
      ds.y[static_cast<Index>(i)] = raw.y[idx[i]];
    }
    ds.feature_names = raw.feature_names;
    ds.standardization = raw.standardization;
    return ds;
  };

  std::vector<Fold> folds;
  folds.reserve(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    std::vector<Index> test_idx = assignments[static_cast<std::size_t>(f)];
    std::sort(test_idx.begin(), test_idx.end());
    std::vector<Index> train_idx;
    train_idx.reserve(static_cast<std::size_t>(n) - test_idx.size());
    for (int g = 0; g < k; ++g) {
      if (g == f) continue;
      for (Index i : assignments[static_cast<std::size_t>(g)]) train_idx.push_back(i);
    }
    std::sort(train_idx.begin(), train_idx.end());

    Fold fold;
    const Dataset train_raw = take_rows(train_idx);
    const Standardization s = fit_standardization(train_raw);
    fold.train = apply_standardization(train_raw, s);
    fold.test = apply_standardization(take_rows(test_idx), s);
    fold.test_indices = std::move(test_idx);
    folds.push_back(std::move(fold));
  }
  return folds;
}

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_table(const std::string& path, const Mat& X, const Vec& y,
                 const std::vector<std::string>& feature_names, const std::string& response_name,
                 char delimiter) {
  if (static_cast<Index>(feature_names.size()) != X.cols())
    throw std::invalid_argument("write_table: feature name count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_table: cannot open " + path);
  for (const auto& name : feature_names) out << name << delimiter;
  out << response_name << '\n';
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index j = 0; j < X.cols(); ++j) out << format_double(X(i, j)) << delimiter;
    out << format_double(y[i]) << '\n';
  }
}

void write_columns(const std::string& path, const std::vector<std::string>& headers,
                   const std::vector<Vec>& columns, char delimiter) {
  if (headers.size() != columns.size())
    throw std::invalid_argument("write_columns: header/column count mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_columns: cannot open " + path);
  for (std::size_t j = 0; j < headers.size(); ++j)
    out << headers[j] << (j + 1 < headers.size() ? std::string(1, delimiter) : std::string());
  out << '\n';
  const Index n = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns)
    if (c.size() != n) throw std::invalid_argument("write_columns: ragged columns");
  for (Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j)
      out << format_double(columns[j][i])
          << (j + 1 < columns.size() ? std::string(1, delimiter) : std::string());
    out << '\n';
  }
}

}  // namespace flowgpr::data
