#include <doctest.h>

#include <cmath>
#include <random>

#include "cmoe/error.hpp"
#include "cmoe/kernels.hpp"
#include "oracles.hpp"

using namespace cmoe;
namespace k = cmoe::kernels;

namespace {

struct Instance {
  Matrix x, coef, pi, means;
  std::vector<double> w, y, sigma2;
};

Instance make(std::size_t n, std::size_t d, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance in{oracle::random_design(n, d, rng), Matrix(c, d + 1), Matrix(c, n), Matrix(c, n), {}, {}, {}};
  for (std::size_t r = 0; r < c; ++r)
    for (std::size_t j = 0; j <= d; ++j) in.coef(r, j) = 3.0 * z(rng);
  for (std::size_t i = 0; i < n; ++i) {
    in.w.push_back(i % 7 == 0 ? 0.0 : u(rng));
    in.y.push_back(z(rng));
    for (std::size_t r = 0; r < c; ++r) {
      in.pi(r, i) = u(rng) < 0.2 ? 0.0 : u(rng);
      in.means(r, i) = z(rng);
    }
    in.pi(i % c, i) = 1.0;
  }
  for (std::size_t r = 0; r < c; ++r) in.sigma2.push_back(0.1 + u(rng));
  return in;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i] == b[i] || (std::isnan(a[i]) && std::isnan(b[i])))) return false;
  return true;
}

}  // namespace

TEST_CASE("kernels: OpenMP results are bit-identical to the serial reference") {
  const int saved = k::max_threads();
  k::set_max_threads(4);
  for (std::size_t n : {17u, 511u, 2048u}) {
    const auto in = make(n, 6, 3, n);
    const auto gs = k::serial::weighted_gram(in.x, in.w, in.y);
    const auto go = k::omp::weighted_gram(in.x, in.w, in.y);
    CHECK(gs.gram == go.gram);
    CHECK(bit_equal(gs.rhs, go.rhs));

    const Matrix ss = k::serial::linear_scores(in.x, in.coef);
    CHECK(ss == k::omp::linear_scores(in.x, in.coef));
    const Matrix gates = k::serial::softmax_columns(ss);
    CHECK(gates == k::omp::softmax_columns(ss));

    const auto rs = k::serial::responsibilities(in.pi, gates, in.means, in.y, in.sigma2);
    const auto ro = k::omp::responsibilities(in.pi, gates, in.means, in.y, in.sigma2);
    CHECK(rs.gamma == ro.gamma);
    CHECK(bit_equal(rs.phi, ro.phi));
    CHECK(bit_equal(rs.log_mix, ro.log_mix));

    const std::vector<std::size_t> cols{0, 2, 5};
    Matrix sub(3, 3);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) sub(a, b) = gs.gram(cols[a], cols[b]);
    const Matrix inv = LuFactorization(sub).inverse();
    CHECK(bit_equal(k::serial::hat_diagonal(in.x, cols, in.w, inv), k::omp::hat_diagonal(in.x, cols, in.w, inv)));
  }
  k::set_max_threads(saved);
}

TEST_CASE("kernels: weighted gram matches the definition") {
  const auto in = make(40, 3, 2, 7);
  const auto g = k::serial::weighted_gram(in.x, in.w, in.y);
  for (std::size_t a = 0; a < 4; ++a) {
    double r = 0.0;
    for (std::size_t i = 0; i < 40; ++i) r += in.w[i] * in.x(i, a) * in.y[i];
    CHECK(g.rhs[a] == doctest::Approx(r).epsilon(1e-13));
    for (std::size_t b = 0; b < 4; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < 40; ++i) s += in.w[i] * in.x(i, a) * in.x(i, b);
      CHECK(g.gram(a, b) == doctest::Approx(s).epsilon(1e-13));
      CHECK(g.gram(a, b) == g.gram(b, a));
    }
  }
}

TEST_CASE("kernels: softmax is stable for huge scores") {
  const Matrix s{{1e4, -1e4, 0.0}, {0.0, 1e4, 0.0}, {-1e4, 0.0, 0.0}};
  const Matrix g = k::softmax_columns(s);
  CHECK(g.all_finite());
  for (std::size_t i = 0; i < 3; ++i) CHECK(g(0, i) + g(1, i) + g(2, i) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g(0, 0) == 1.0);
}

TEST_CASE("kernels: responsibilities normalize and respect zero possibility") {
  const auto in = make(300, 4, 3, 21);
  const Matrix gates = k::softmax_columns(k::linear_scores(in.x, in.coef));
  const auto r = k::responsibilities(in.pi, gates, in.means, in.y, in.sigma2);
  for (std::size_t i = 0; i < 300; ++i) {
    double t = 0.0, phi = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      if (in.pi(c, i) == 0.0) CHECK(r.gamma(c, i) == 0.0);
      t += r.gamma(c, i);
      phi += in.pi(c, i) * r.gamma(c, i);
    }
    CHECK(std::abs(t - 1.0) < 1e-12);
    CHECK(r.phi[i] == doctest::Approx(phi).epsilon(1e-14));
  }
}
