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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowgpr/kernel.hpp"
#include "flowgpr/random.hpp"
#include "support/oracles.hpp"

using namespace flowgpr;

namespace {

Mat random_matrix(Index n, Index d, RandomStream& rng) {
  Mat X(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) X(i, j) = rng.normal();
  return X;
}

HyperParams random_params(Index d, RandomStream& rng) {
  HyperParams p;
  p.theta.resize(d);
  for (Index j = 0; j < d; ++j) p.theta[j] = std::exp(rng.uniform(-2.0, 1.0));
  p.tau = std::exp(rng.uniform(-1.0, 1.0));
  p.sigma2 = std::exp(rng.uniform(-2.5, 0.0));
  return p;
}

// Naive dense evaluation with explicit inverse and determinant.
double naive_lml(const Vec& y, const Mat& X, const HyperParams& p) {
  const Index n = X.rows();
  Mat C(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      C(i, j) = kernel::se_kernel(X.row(i).transpose(), X.row(j).transpose(), p) +
                (i == j ? p.sigma2 : 0.0);
  const double quad = y.dot(C.inverse() * y);
  return -0.5 * static_cast<double>(n) * std::log(2.0 * M_PI) -
         0.5 * std::log(C.determinant()) - 0.5 * quad;
}

}  // namespace

TEST_CASE("aniso_distance basics") {
  Vec z(2), zp(2), theta(2);
  z << 1.0, 2.0;
  zp << 0.0, 0.0;
  theta << 1.0, 0.25;
  CHECK(kernel::aniso_distance(z, z, theta) == 0.0);
  CHECK(kernel::aniso_distance(z, zp, Vec::Zero(2)) == 0.0);
  CHECK(kernel::aniso_distance(z, zp, theta) == doctest::Approx(1.4142136).epsilon(1e-7));
  CHECK(kernel::aniso_distance(z, zp, theta) ==
        kernel::aniso_distance(zp, z, theta));

  Vec bad(3);
  CHECK_THROWS_AS(kernel::aniso_distance(z, bad, theta), std::invalid_argument);
  Vec neg(2);
  neg << -1.0, 1.0;
  CHECK_THROWS_AS(kernel::aniso_distance(z, zp, neg), std::invalid_argument);
}

TEST_CASE("se_kernel basics") {
  Vec z(2), zp(2);
  z << 1.0, 2.0;
  zp << 0.0, 0.0;

  HyperParams p;
  p.theta = Vec::Zero(2);
  p.tau = 2.0;
  p.sigma2 = 0.1;
  CHECK(kernel::se_kernel(z, z, p) == doctest::Approx(0.5).epsilon(1e-15));

  p.tau = 1.0;
  CHECK(kernel::se_kernel(z, zp, p) == doctest::Approx(1.0).epsilon(1e-15));

  p.theta << 1.0, 0.25;
  CHECK(kernel::se_kernel(z, zp, p) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("se_kernel bounded by 1/tau with equality only at zero distance") {
  RandomStream rng(11);
  HyperParams p = random_params(3, rng);
  for (int t = 0; t < 50; ++t) {
    const Vec z = rng.normal_vector(3), zp = rng.normal_vector(3);
    const double k = kernel::se_kernel(z, zp, p);
    CHECK(k > 0.0);
    CHECK(k <= 1.0 / p.tau);
  }
}

TEST_CASE("build_covariance examples") {
  HyperParams p;
  p.theta = Vec::Zero(1);
  p.tau = 2.0;
  p.sigma2 = 0.1;
  Mat X1(1, 1);
  X1 << 0.0;
  const Mat K1 = kernel::build_covariance(X1, p, 0.0);
  CHECK(K1(0, 0) == doctest::Approx(0.6).epsilon(1e-15));

  // Constant kernel: all off-diagonal entries equal 1.
  RandomStream rng(5);
  Mat X = random_matrix(6, 3, rng);
  HyperParams pc;
  pc.theta = Vec::Zero(3);
  pc.tau = 1.0;
  pc.sigma2 = 1e-12;  // strictly positive per the parameter contract
  const Mat Kc = kernel::build_covariance(X, pc, 1e-6);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j)
      if (i != j) CHECK(Kc(i, j) == doctest::Approx(1.0).epsilon(1e-12));

  // 2x2 hand evaluation.
  Mat X2(2, 1);
  X2 << 0.0, 1.0;
  HyperParams p2;
  p2.theta = Vec::Constant(1, 2.0);
  p2.tau = 1.0;
  p2.sigma2 = 0.1;
  const Mat K2 = kernel::build_covariance(X2, p2, 0.0);
  CHECK(K2(0, 0) == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(K2(1, 1) == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(K2(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(K2(1, 0) == K2(0, 1));

  Mat bad = X2;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(kernel::build_covariance(bad, p2, 0.0), std::invalid_argument);
}

TEST_CASE("build_covariance is exactly symmetric") {
  RandomStream rng(17);
  const Mat X = random_matrix(20, 4, rng);
  const HyperParams p = random_params(4, rng);
  const Mat K = kernel::build_covariance(X, p, 0.0);
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("monotone sparsification: appending a covariate never increases covariance") {
  RandomStream rng(23);
  const Mat X = random_matrix(10, 3, rng);
  HyperParams p = random_params(3, rng);
  const Mat K_before = kernel::kernel_matrix(X, p);

  Mat X2(10, 4);
  X2.leftCols(3) = X;
  X2.col(3) = rng.normal_vector(10);
  HyperParams p2 = p;
  p2.theta.conservativeResize(4);
  p2.theta[3] = 0.7;
  const Mat K_after = kernel::kernel_matrix(X2, p2);
  for (Index i = 0; i < 10; ++i)
    for (Index j = 0; j < 10; ++j)
      if (i != j) CHECK(K_after(i, j) <= K_before(i, j) + 1e-15);
}

TEST_CASE("factorize basics") {
  const Mat I5 = Mat::Identity(5, 5);
  const kernel::KernelMatrixFactor f = kernel::factorize(I5);
  CHECK((f.chol_lower - I5).cwiseAbs().maxCoeff() == 0.0);
  CHECK(f.log_det == 0.0);

  Mat S(1, 1);
  S << 4.0;
  const kernel::KernelMatrixFactor f1 = kernel::factorize(S);
  CHECK(f1.chol_lower(0, 0) == doctest::Approx(2.0));
  CHECK(f1.log_det == doctest::Approx(std::log(4.0)).epsilon(1e-15));
}

TEST_CASE("factorize log_det matches a direct determinant oracle") {
  RandomStream rng(31);
  for (int t = 0; t < 20; ++t) {
    const Mat A = random_matrix(5, 5, rng);
    const Mat S = A * A.transpose() + 0.5 * Mat::Identity(5, 5);
    const kernel::KernelMatrixFactor f = kernel::factorize(S);
    CHECK(f.log_det == doctest::Approx(std::log(S.determinant())).epsilon(1e-10));
    // Factor reproduces the input.
    const Mat R = f.chol_lower * f.chol_lower.transpose();
    CHECK((R - S).norm() / S.norm() < 1e-8);
    // log_det consistent with the factor diagonal.
    const double direct = 2.0 * f.chol_lower.diagonal().array().log().sum();
    CHECK(std::abs(f.log_det - direct) <= 1e-12 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("factorize error paths") {
  Mat asym(2, 2);
  asym << 1.0, 0.5, 0.2, 1.0;
  CHECK_THROWS_AS(kernel::factorize(asym), std::invalid_argument);

  Mat npd(2, 2);
  npd << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
  try {
    kernel::factorize(npd);
    FAIL("expected FactorizationError");
  } catch (const FactorizationError& e) {
    CHECK(e.pivot() == 1);
  }

  // The retry ladder repairs a slightly indefinite matrix.
  Mat near(2, 2);
  near << 1.0, 1.0, 1.0, 1.0;
  CHECK_NOTHROW(kernel::factorize_auto(near));
}

TEST_CASE("log_marginal_likelihood scalar closed form") {
  HyperParams p;
  p.theta = Vec::Zero(1);
  p.tau = 2.0;
  p.sigma2 = 0.1;
  Mat X(1, 1);
  X << 0.3;
  Vec y(1);
  y << 0.0;
  // Closed form -log(2 pi 0.6)/2 = -0.6635257213.
  CHECK(kernel::log_marginal_likelihood(y, X, p) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI * 0.6)).epsilon(1e-9));

  // Monotone decreasing in the variance at y = 0.
  double prev = kernel::log_marginal_likelihood(y, X, p);
  for (double s2 : {0.2, 0.5, 2.0}) {
    p.sigma2 = s2;
    const double cur = kernel::log_marginal_likelihood(y, X, p);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("log_marginal_likelihood matches naive dense evaluation") {
  RandomStream rng(41);
  for (int t = 0; t < 25; ++t) {
    const Index n = 8;
    const Mat X = random_matrix(n, 3, rng);
    const Vec y = rng.normal_vector(n);
    const HyperParams p = random_params(3, rng);
    CHECK(std::abs(kernel::log_marginal_likelihood(y, X, p) - naive_lml(y, X, p)) < 1e-8);
  }
}

TEST_CASE("log_marginal_likelihood_grad matches finite differences") {
  RandomStream rng(43);
  const Index n = 7, d = 3;
  const Mat X = random_matrix(n, d, rng);
  const Vec y = rng.normal_vector(n);
  HyperParams p = random_params(d, rng);

  const kernel::LogLikGrad g = kernel::log_marginal_likelihood_grad(y, X, p);
  CHECK(g.value == doctest::Approx(kernel::log_marginal_likelihood(y, X, p)).epsilon(1e-12));

  const double h = 1e-6;
  for (Index j = 0; j < d; ++j) {
    HyperParams lo = p, hi = p;
    lo.theta[j] -= h;
    hi.theta[j] += h;
    const double fd = (kernel::log_marginal_likelihood(y, X, hi) -
                       kernel::log_marginal_likelihood(y, X, lo)) /
                      (2.0 * h);
    CHECK(g.dtheta[j] == doctest::Approx(fd).epsilon(1e-6));
  }
  {
    HyperParams lo = p, hi = p;
    lo.tau -= h;
    hi.tau += h;
    const double fd = (kernel::log_marginal_likelihood(y, X, hi) -
                       kernel::log_marginal_likelihood(y, X, lo)) /
                      (2.0 * h);
    CHECK(g.dtau == doctest::Approx(fd).epsilon(1e-6));
  }
  {
    HyperParams lo = p, hi = p;
    lo.sigma2 -= h;
    hi.sigma2 += h;
    const double fd = (kernel::log_marginal_likelihood(y, X, hi) -
                       kernel::log_marginal_likelihood(y, X, lo)) /
                      (2.0 * h);
    CHECK(g.dsigma2 == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("predictive_distribution basics") {
  RandomStream rng(53);
  const Mat X = random_matrix(6, 2, rng);
  const Vec y = rng.normal_vector(6);

  SUBCASE("interpolation in the small-noise limit") {
    HyperParams p;
    p.theta = Vec::Constant(2, 1.0);
    p.tau = 1.0;
    p.sigma2 = 1e-8;
    const auto [mean, var] = kernel::predictive_distribution(X, y, X.topRows(2), p);
    CHECK(mean[0] == doctest::Approx(y[0]).epsilon(1e-4));
    CHECK(mean[1] == doctest::Approx(y[1]).epsilon(1e-4));
    CHECK(var[0] > 0.0);
  }

  SUBCASE("constant kernel gives identical predictions everywhere") {
    HyperParams p;
    p.theta = Vec::Zero(2);
    p.tau = 1.0;
    p.sigma2 = 0.3;
    const Mat Xt = random_matrix(4, 2, rng);
    const auto [mean, var] = kernel::predictive_distribution(X, y, Xt, p);
    for (Index i = 1; i < 4; ++i) {
      CHECK(mean[i] == doctest::Approx(mean[0]).epsilon(1e-12));
      CHECK(var[i] == doctest::Approx(var[0]).epsilon(1e-12));
    }
  }

  SUBCASE("n=2 case matches direct linear algebra") {
    Mat Xt(2, 1), Xs(1, 1);
    Xt << 0.0, 1.0;
    Xs << 0.4;
    Vec yt(2);
    yt << 0.7, -0.2;
    HyperParams p;
    p.theta = Vec::Constant(1, 1.3);
    p.tau = 1.4;
    p.sigma2 = 0.2;

    const auto [mean, var] = kernel::predictive_distribution(Xt, yt, Xs, p);

    Mat C(2, 2);
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 2; ++j)
        C(i, j) = kernel::se_kernel(Xt.row(i).transpose(), Xt.row(j).transpose(), p) +
                  (i == j ? p.sigma2 : 0.0);
    Vec ks(2);
    for (Index i = 0; i < 2; ++i)
      ks[i] = kernel::se_kernel(Xt.row(i).transpose(), Xs.row(0).transpose(), p);
    const Mat Ci = C.inverse();
    const double mean_direct = ks.dot(Ci * yt);
    const double var_direct = 1.0 / p.tau + p.sigma2 - ks.dot(Ci * ks);
    CHECK(mean[0] == doctest::Approx(mean_direct).epsilon(1e-10));
    CHECK(var[0] == doctest::Approx(var_direct).epsilon(1e-10));
  }

  SUBCASE("predictive variance positive on random instances") {
    HyperParams p = random_params(2, rng);
    const Mat Xt = random_matrix(40, 2, rng);
    const auto [mean, var] = kernel::predictive_distribution(X, y, Xt, p);
    for (Index i = 0; i < var.size(); ++i) CHECK(var[i] > 0.0);
  }

  SUBCASE("dimension mismatch") {
    HyperParams p = random_params(2, rng);
    const Mat Xt = random_matrix(4, 3, rng);
    CHECK_THROWS_AS(kernel::predictive_distribution(X, y, Xt, p), std::invalid_argument);
  }
}
