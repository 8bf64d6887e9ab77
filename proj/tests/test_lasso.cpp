#include <doctest.h>

#include <cmath>
#include <random>

#include "cmoe/error.hpp"
#include "cmoe/em.hpp"
#include "cmoe/kernels.hpp"
#include "cmoe/lasso.hpp"
#include "oracles.hpp"

using namespace cmoe;

namespace {

struct Problem {
  Matrix x;
  std::vector<double> y, w;
};

Problem make(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Problem p{oracle::random_design(n, d, rng), {}, {}};
  std::vector<double> beta(d + 1, 0.0);
  for (std::size_t j = 0; j <= d; ++j) beta[j] = j % 2 ? z(rng) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p.y.push_back(oracle::dot(p.x, i, beta) + 0.3 * z(rng));
    p.w.push_back(u(rng));
  }
  return p;
}

}  // namespace

TEST_CASE("soft_threshold") {
  CHECK(soft_threshold(0.5, 1.0) == 0.0);
  CHECK(soft_threshold(2.0, 0.5) == 1.5);
  CHECK(soft_threshold(-2.0, 0.5) == -1.5);
  CHECK(soft_threshold(1.0, 1.0) == 0.0);
  CHECK(soft_threshold(3.0, 0.0) == 3.0);
}

TEST_CASE("lasso: lambda at or above lambda_max zeroes every penalized coefficient") {
  const auto p = make(60, 5, 1);
  const auto sys = kernels::weighted_gram(p.x, p.w, p.y);
  const double lmax = lambda_max(sys);
  for (double scale : {1.0, 1.5, 10.0}) {
    const auto r = solve_weighted_lasso(sys, lmax * scale, std::vector<double>(6, 0.0));
    for (std::size_t j = 1; j < 6; ++j) CHECK(r.coef[j] == 0.0);
  }
  const auto below = solve_weighted_lasso(sys, lmax * 0.9, std::vector<double>(6, 0.0));
  CHECK(active_set(below.coef).size() >= 1);
}

TEST_CASE("lasso: lambda = 0 equals weighted least squares") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto p = make(40, 4, s);
    const auto r = solve_weighted_lasso(kernels::weighted_gram(p.x, p.w, p.y), 0.0, std::vector<double>(5, 0.0));
    const auto want = oracle::wls(p.x, p.y, p.w);
    for (std::size_t j = 0; j < 5; ++j) CHECK(r.coef[j] == doctest::Approx(want[j]).epsilon(1e-9));
  }
}

TEST_CASE("lasso: single coordinate closed form") {
  // d = 1 with a centered feature: b1 = S(sum w x y, lambda) / sum w x^2.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  const std::size_t n = 30;
  Matrix x(n, 2);
  std::vector<double> y(n), w(n, 1.0);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += (x(i, 1) = z(rng));
  mean /= n;
  double ymean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) -= mean;
    y[i] = 2.0 * x(i, 1) + z(rng);
    ymean += y[i];
  }
  ymean /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) sxy += x(i, 1) * y[i], sxx += x(i, 1) * x(i, 1);
  for (double lambda : {0.0, 1.0, 5.0, 20.0, 1e3}) {
    const auto r = solve_weighted_lasso(kernels::weighted_gram(x, w, y), lambda, std::vector<double>(2, 0.0));
    CHECK(r.coef[1] == doctest::Approx(soft_threshold(sxy, lambda) / sxx).epsilon(1e-9));
    CHECK(r.coef[0] == doctest::Approx(ymean).epsilon(1e-9));
  }
}

TEST_CASE("lasso: KKT conditions across the path") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto p = make(80, 8, 100 + s);
    const auto sys = kernels::weighted_gram(p.x, p.w, p.y);
    const double lmax = lambda_max(sys);
    for (double f : {0.0, 0.01, 0.1, 0.5, 0.9, 1.0}) {
      const auto r = solve_weighted_lasso(sys, f * lmax, std::vector<double>(9, 0.0));
      CHECK(r.converged);
      CHECK(oracle::kkt_violation(p.x, p.y, p.w, r.coef, f * lmax) <= 1e-5);
    }
  }
}

TEST_CASE("lasso: zero weights leave samples out entirely") {
  auto p = make(50, 3, 8);
  const auto base = solve_weighted_lasso(kernels::weighted_gram(p.x, p.w, p.y), 0.5, std::vector<double>(4, 0.0));
  auto q = p;
  for (std::size_t i = 0; i < 50; i += 5) {
    q.w[i] = 0.0;
    q.y[i] = 1e6;
  }
  auto r = p;
  for (std::size_t i = 0; i < 50; i += 5) r.w[i] = 0.0;
  const auto a = solve_weighted_lasso(kernels::weighted_gram(q.x, q.w, q.y), 0.5, std::vector<double>(4, 0.0));
  const auto b = solve_weighted_lasso(kernels::weighted_gram(r.x, r.w, r.y), 0.5, std::vector<double>(4, 0.0));
  CHECK(a.coef == b.coef);
  (void)base;
  const std::vector<double> zero(50, 0.0);
  CHECK_THROWS_AS(solve_weighted_lasso(kernels::weighted_gram(p.x, zero, p.y), 0.5, std::vector<double>(4, 0.0)),
                  Error);
}

TEST_CASE("penalized path: chosen point is the curve minimum, ties to larger lambda") {
  const auto p = make(70, 6, 12);
  PathOptions opt;
  const auto fit = fit_penalized_path(p.x, p.y, p.w, std::vector<double>(7, 0.0), opt);
  CHECK(fit.curve.lambdas.size() == 31);
  CHECK(fit.curve.lambdas.back() == 0.0);
  for (std::size_t k = 1; k < fit.curve.lambdas.size(); ++k) CHECK(fit.curve.lambdas[k] < fit.curve.lambdas[k - 1]);
  for (std::size_t k = 0; k < fit.curve.cv.size(); ++k) CHECK(fit.curve.cv[fit.curve.chosen] <= fit.curve.cv[k]);
  CHECK(fit.lambda == fit.curve.lambdas[fit.curve.chosen]);
}

TEST_CASE("fit_lasso baseline predicts in original units") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  Dataset ds;
  ds.x = Matrix(100, 3);
  for (std::size_t i = 0; i < 100; ++i) {
    for (std::size_t j = 0; j < 3; ++j) ds.x(i, j) = z(rng);
    ds.y.push_back(50.0 + 4.0 * ds.x(i, 0) + 0.01 * z(rng));
  }
  ds.feature_names = {"a", "b", "c"};
  const auto model = fit_lasso(ds, {});
  const auto pred = model.predict(ds);
  for (std::size_t i = 0; i < 100; ++i) CHECK(pred[i] == doctest::Approx(ds.y[i]).epsilon(1e-3));
}
