#include <doctest.h>

#include <set>

#include "cmoe/error.hpp"
#include "cmoe/possibility.hpp"

using namespace cmoe;

TEST_CASE("alpha_certain") {
  CHECK(alpha_certain({{0, 1}, 1.0}, 4) == std::vector<double>{1, 1, 0, 0});
  CHECK(alpha_certain({{0}, 0.0}, 3) == std::vector<double>{1, 1, 1});
  const auto r = alpha_certain({{2}, 0.4}, 3);
  CHECK(r[0] == doctest::Approx(0.6));
  CHECK(r[1] == doctest::Approx(0.6));
  CHECK(r[2] == 1.0);
  CHECK_THROWS_AS(alpha_certain({{3}, 0.5}, 3), Error);
  CHECK_THROWS_AS(alpha_certain({{}, 0.5}, 3), Error);
  CHECK_THROWS_AS(alpha_certain({{0}, 1.5}, 3), Error);
}

TEST_CASE("alpha_certain takes at most two values") {
  for (double a : {0.0, 0.3, 1.0}) {
    const auto r = alpha_certain({{1, 4, 5}, a}, 9);
    const std::set<double> vals(r.begin(), r.end());
    CHECK(vals.size() == (a == 0.0 ? 1u : 2u));
  }
}

TEST_CASE("beta_trapezoid") {
  const std::vector<double> pos{1.5};
  CHECK(beta_trapezoid({0, 1, 2, 3, 0.0}, pos)[0] == 1.0);
  CHECK(beta_trapezoid({0, 1, 2, 3, 0.3}, std::vector<double>{10.0})[0] == doctest::Approx(0.3));
  CHECK(beta_trapezoid({0, 2, 4, 6, 0.0}, std::vector<double>{1.0})[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(beta_trapezoid({0, 2, 2, 6, 0.0}, pos), Error);
  std::vector<double> grid;
  for (int i = -5; i < 20; ++i) grid.push_back(i * 0.5);
  const auto r = beta_trapezoid({0, 2, 4, 6, 0.2}, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(r[i] >= 0.2);
    if (grid[i] >= 2 && grid[i] <= 4) CHECK(r[i] == 1.0);
  }
}

TEST_CASE("complete_ignorance") {
  CHECK(complete_ignorance(3) == std::vector<double>{1, 1, 1});
  CHECK(complete_ignorance(1) == std::vector<double>{1});
  CHECK_NOTHROW(ContextMatrix::from_rows({complete_ignorance(4), alpha_certain({{0}, 1.0}, 4)}, {"a", "b"}));
}

TEST_CASE("context matrix validation") {
  CHECK_THROWS_AS(ContextMatrix::from_rows({{0.5, 1.2}}, {"a"}), Error);
  CHECK_THROWS_AS(ContextMatrix::from_rows({{0.5, 1.0}, {1.0}}, {"a", "b"}), Error);
  const auto ctx = ContextMatrix::from_rows({{0.5, 0.2}, {1.0, 0.0}}, {"a", "b"});
  CHECK(ctx.unnormalized_rows() == std::vector<std::size_t>{0});
  const auto sub = ctx.select_samples(std::vector<std::size_t>{1});
  CHECK(sub.n_samples() == 1);
  CHECK(sub(0, 0) == doctest::Approx(0.2));
}

TEST_CASE("consistency_index") {
  const auto ctx = ContextMatrix::from_rows({{1, 1, 0, 0}, {0, 0, 1, 1}}, {"a", "b"});
  Matrix zero_gate{{0, 0, 0, 0}, {1, 1, 1, 1}};
  auto ci = consistency_index(zero_gate, ctx);
  CHECK(ci.per_context[0] == 1.0);
  CHECK(ci.per_context[1] == 0.5);

  const auto ign = ContextMatrix::from_rows({complete_ignorance(4), complete_ignorance(4)}, {"a", "b"});
  const Matrix g{{0.3, 0.9, 0.5, 0.1}, {0.7, 0.1, 0.5, 0.9}};
  CHECK(consistency_index(g, ign).overall == 1.0);

  // C_I,1 = 1, C_I,2 = 0.25 -> overall 0.5.
  const auto ctx2 = ContextMatrix::from_rows({{1, 1, 1, 1}, {1, 0, 0, 0}}, {"a", "b"});
  const Matrix g2{{0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}};
  ci = consistency_index(g2, ctx2);
  CHECK(ci.per_context[1] == 0.25);
  CHECK(ci.overall == doctest::Approx(0.5));
  // Non-strict: g == pi counts as consistent.
  const auto ctx3 = ContextMatrix::from_rows({{0.5, 1}, {1, 0.5}}, {"a", "b"});
  CHECK(consistency_index(Matrix{{0.5, 0.5}, {0.5, 0.5}}, ctx3).overall == 1.0);
  CHECK_THROWS_AS(consistency_index(Matrix{{1, 1}}, ctx3), Error);
}

TEST_CASE("tune_certainty") {
  auto table_fn = [](std::vector<double> cv, std::vector<double> ci) {
    return [cv, ci](double c) {
      const auto k = static_cast<std::size_t>(c * 10 + 0.5);
      return TunePoint{c, cv[k], ci[k], false};
    };
  };
  SUBCASE("single point") {
    const auto r = tune_certainty(std::vector<double>{0.3}, table_fn({0, 0, 0, 5}, {0, 0, 0, 1}), 0.9);
    CHECK(r.certainty == 0.3);
  }
  SUBCASE("interior minimizer, checked against a scan of the table") {
    const std::vector<double> grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    const auto r = tune_certainty(grid, table_fn({9, 7, 4, 3, 5, 8}, {1, 1, 1, 0.95, 0.95, 0.92}), 0.9);
    std::size_t best = 0;
    for (std::size_t k = 1; k < r.table.size(); ++k)
      if (r.table[k].cv_error < r.table[best].cv_error) best = k;
    CHECK(r.selected == best);
    CHECK(r.certainty == doctest::Approx(0.3));
    CHECK(r.table.size() == grid.size());
  }
  SUBCASE("infeasible points are skipped, ties go to the lower certainty") {
    const std::vector<double> grid{0.0, 0.1, 0.2, 0.3};
    const auto r = tune_certainty(grid, table_fn({1, 4, 4, 4}, {0.5, 0.95, 0.95, 0.95}), 0.9);
    CHECK(r.certainty == doctest::Approx(0.1));
  }
  SUBCASE("no feasible point carries the table") {
    const std::vector<double> grid{0.0, 0.1};
    try {
      tune_certainty(grid, table_fn({1, 2}, {0.1, 0.2}), 0.9);
      FAIL("expected NoFeasiblePoint");
    } catch (const NoFeasiblePoint& e) {
      CHECK(e.table().size() == 2);
      CHECK(e.code() == ErrorCode::kNoFeasiblePoint);
    }
  }
  SUBCASE("failing fits are marked") {
    const std::vector<double> grid{0.0, 0.1};
    const auto r = tune_certainty(
        grid,
        [](double c) -> TunePoint {
          if (c == 0.0) throw Error(ErrorCode::kSingularMatrix, "boom");
          return {c, 1.0, 1.0, false};
        },
        0.9);
    CHECK(r.table[0].failed);
    CHECK(r.certainty == doctest::Approx(0.1));
  }
  CHECK_THROWS_AS(tune_certainty(std::vector<double>{}, table_fn({1}, {1}), 0.9), Error);
  CHECK_THROWS_AS(tune_certainty(std::vector<double>{1.5}, table_fn({1}, {1}), 0.9), Error);
}
