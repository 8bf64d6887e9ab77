#include <doctest.h>

#include <cmath>
#include <random>

#include "cmoe/error.hpp"
#include "cmoe/synth.hpp"
#include "oracles.hpp"

using namespace cmoe;

TEST_CASE("synth: same seed gives the same data") {
  const auto spec = default_synth_spec(3, 5, 300, 2, 0.2, 11);
  const auto a = generate(spec), b = generate(spec);
  CHECK(a.data.x == b.data.x);
  CHECK(a.data.y == b.data.y);
  CHECK(a.regime == b.regime);
  auto other = spec;
  other.seed = 12;
  CHECK(generate(other).data.y != a.data.y);
}

TEST_CASE("synth: supports and schedule") {
  const auto spec = default_synth_spec(3, 9, 300, 3, 0.1, 2);
  const auto sup = true_supports(spec);
  REQUIRE(sup.size() == 3);
  for (const auto& s : sup) CHECK(s.size() == 3);
  // Nine features are enough for disjoint supports.
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b)
      for (auto j : sup[a]) CHECK(std::find(sup[b].begin(), sup[b].end(), j) == sup[b].end());
  for (std::size_t c = 0; c < 3; ++c)
    for (auto j : sup[c]) {
      CHECK(std::abs(spec.theta[c][j]) >= 1.0);
      CHECK(std::abs(spec.theta[c][j]) <= 2.0);
    }
  const auto data = generate(spec);
  for (std::size_t i = 0; i < 300; ++i) {
    CHECK(data.regime[i] == i / 100);
    CHECK(data.exact(data.regime[i], i) == 1.0);
  }
}

TEST_CASE("synth: single context") {
  const auto spec = default_synth_spec(1, 4, 50, 2, 0.1, 3);
  const auto data = generate(spec);
  CHECK(data.exact.n_contexts() == 1);
  for (std::size_t i = 0; i < 50; ++i) CHECK(data.regime[i] == 0);
}

TEST_CASE("synth: least squares per regime recovers the coefficients") {
  auto spec = default_synth_spec(2, 4, 2000, 2, 0.1, 21);
  spec.mode_shift = 1.0;
  const auto data = generate(spec);
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < 2000; ++i)
      if (data.regime[i] == c) rows.push_back(i);
    Matrix x(rows.size(), 5);
    std::vector<double> y, w(rows.size(), 1.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      x(r, 0) = 1.0;
      for (std::size_t j = 0; j < 4; ++j) x(r, j + 1) = data.data.x(rows[r], j);
      y.push_back(data.data.y[rows[r]]);
    }
    const auto b = oracle::wls(x, y, w);
    // Standard errors are about noise / sqrt(n); 0.01 is several of them.
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(b[j] - spec.theta[c][j]) < 0.01);
  }
}

TEST_CASE("synth: noiseless responses are exact") {
  const auto spec = default_synth_spec(2, 3, 100, 2, 0.0, 4);
  const auto data = generate(spec);
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& t = spec.theta[data.regime[i]];
    double m = t[0];
    for (std::size_t j = 0; j < 3; ++j) m += t[j + 1] * data.data.x(i, j);
    CHECK(data.data.y[i] == doctest::Approx(m).epsilon(1e-14));
  }
}

TEST_CASE("synth: analyst labels") {
  auto spec = default_synth_spec(2, 3, 200, 1, 0.1, 5);
  spec.label_shift = 10;
  spec.blur_width = 5;
  const auto data = generate(spec);
  // Shifted boundary at 110.
  CHECK(data.nominal(0, 105) == 1.0);
  CHECK(data.nominal(1, 115) == 1.0);
  CHECK(data.exact(1, 105) == 1.0);
  for (std::size_t i = 0; i < 200; ++i) {
    CHECK(data.blurred(0, i) >= 0.0);
    CHECK(data.blurred(0, i) <= 1.0);
  }
  CHECK(data.blurred(0, 50) == 1.0);
  CHECK(data.blurred(0, 180) == 0.0);
  CHECK(data.blurred(0, 110) > 0.0);
  CHECK(data.blurred(0, 110) < 1.0);

  spec.n_batches = 4;
  const auto batched = generate(spec);
  CHECK(batched.data.has_batches());
  CHECK(batched.data.batch[0] == "b000");
  CHECK(batched.data.batch[199] == "b003");
}

TEST_CASE("synth: invalid specs") {
  auto spec = default_synth_spec(2, 3, 100, 1, 0.1, 5);
  spec.n_samples = 1;
  CHECK_THROWS(spec.validate());
  spec = default_synth_spec(2, 3, 100, 1, 0.1, 5);
  spec.theta.pop_back();
  CHECK_THROWS(spec.validate());
}
