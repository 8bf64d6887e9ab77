#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cmoe/dataset.hpp"
#include "cmoe/error.hpp"

using namespace cmoe;

namespace {

Dataset parse(const std::string& text, CsvSchema schema) {
  std::istringstream in(text);
  return parse_csv(in, schema);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

Dataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Dataset ds;
  ds.x = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) ds.x(i, j) = 3.0 * z(rng) + static_cast<double>(j);
    ds.y.push_back(5.0 + z(rng));
    ds.sample_index.push_back(i);
  }
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("v" + std::to_string(j));
  return ds;
}

}  // namespace

TEST_CASE("load_csv") {
  const CsvSchema schema{"y", {}, "", "", ','};
  const auto ds = parse("a,b,y\n1,2,3\n4,5,6\n7,8,9\n", schema);
  CHECK(ds.n_samples() == 3);
  CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.x(2, 1) == 8.0);

  const auto dropped = parse("a,y\n1,\n2,NA\n3,4\n", schema);
  CHECK(dropped.n_samples() == 1);
  CHECK(dropped.dropped_missing_target == 2);
  CHECK(dropped.sample_index == std::vector<std::size_t>{2});

  try {
    parse("a,b,y\n1,2,3\n1,x,3\n", schema);
    FAIL("expected NonNumericCell");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonNumericCell);
    const std::string what = e.what();
    CHECK(what.find("row 1") != std::string::npos);
    CHECK(what.find("'b'") != std::string::npos);
  }
  CHECK(code_of([&] { parse("a,b\n1,2\n", schema); }) == ErrorCode::kMissingColumn);
  CHECK(code_of([&] { load_csv("/nonexistent/file.csv", schema); }) == ErrorCode::kIoError);

  const auto sel = parse("t,a,b,y,batch\n0,1,2,3,p\n1,4,5,6,q\n", {"y", {"b"}, "batch", "t", ','});
  CHECK(sel.n_features() == 1);
  CHECK(sel.batch == std::vector<std::string>{"p", "q"});
  CHECK(sel.time == std::vector<double>{0, 1});
  const auto semi = parse("a;y\n1;2\n", {"y", {}, "", "", ';'});
  CHECK(semi.y == std::vector<double>{2});
}

TEST_CASE("autoscale") {
  const auto ds = random_dataset(50, 3, 2);
  const auto scaler = autoscale_fit(ds);
  const auto scaled = autoscale_apply(scaler, ds);
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0.0, s = 0.0;
    for (std::size_t i = 0; i < 50; ++i) m += scaled.x(i, j);
    m /= 50.0;
    for (std::size_t i = 0; i < 50; ++i) s += (scaled.x(i, j) - m) * (scaled.x(i, j) - m);
    CHECK(std::abs(m) < 1e-10);
    CHECK(std::abs(std::sqrt(s / 49.0) - 1.0) < 1e-10);
  }
  CHECK(code_of([&] { autoscale_apply(scaler, scaled); }) == ErrorCode::kStateError);

  const auto back = autoscale_invert(scaled);
  const auto again = autoscale_apply(scaler, back);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(std::abs(again.y[i] - scaled.y[i]) < 1e-12);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(again.x(i, j) - scaled.x(i, j)) < 1e-12);
  }

  auto constant = ds;
  for (std::size_t i = 0; i < 50; ++i) constant.x(i, 1) = 4.0;
  try {
    autoscale_fit(constant);
    FAIL("expected ZeroVarianceFeature");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kZeroVarianceFeature);
    CHECK(std::string(e.what()).find("v1") != std::string::npos);
  }
}

TEST_CASE("lag_features") {
  auto ds = random_dataset(10, 5, 3);
  LagSpec spec;
  spec.default_delays = {0, 5, 7, 9};
  const auto lagged = lag_features(ds, spec);
  CHECK(lagged.n_features() == 20);
  CHECK(lagged.n_samples() == 1);

  spec.default_delays = {0, 2};
  spec.per_variable["v1"] = {1};
  const auto out = lag_features(ds, spec);
  CHECK(out.n_features() == 9);
  CHECK(out.n_samples() == 8);
  // Each feature (v, delta) at output row r equals variable v at input row r + 2 - delta.
  std::size_t col = 0;
  for (std::size_t v = 0; v < 5; ++v) {
    for (std::size_t delta : spec.delays_for(ds.feature_names[v])) {
      CHECK(out.feature_names[col] == ds.feature_names[v] + "_lag" + std::to_string(delta));
      for (std::size_t r = 0; r < out.n_samples(); ++r) CHECK(out.x(r, col) == ds.x(r + 2 - delta, v));
      ++col;
    }
  }
  CHECK(out.sample_index.front() == 2);
  CHECK(out.y.front() == ds.y[2]);

  LagSpec zero;
  const auto same = lag_features(ds, zero);
  CHECK(same.x == ds.x);

  LagSpec too_big;
  too_big.default_delays = {10};
  CHECK(code_of([&] { lag_features(ds, too_big); }) == ErrorCode::kDelayTooLarge);
  LagSpec unsorted;
  unsorted.default_delays = {3, 1};
  CHECK_THROWS_AS(unsorted.validate(), Error);
}

TEST_CASE("leave_one_batch_out") {
  auto ds = random_dataset(9, 2, 4);
  for (std::size_t i = 0; i < 9; ++i) ds.batch.push_back(std::string(1, static_cast<char>('a' + i / 3)));
  for (std::size_t i = 0; i < 9; ++i) ds.y[i] = static_cast<double>(i % 3);
  const auto eval = leave_one_batch_out(ds, [](const Dataset& train, const Dataset& test) {
    double m = 0.0;
    for (double v : train.y) m += v;
    return std::vector<double>(test.n_samples(), m / static_cast<double>(train.n_samples()));
  });
  CHECK(eval.folds.size() == 3);
  CHECK(eval.pooled_pred.size() == 9);
  for (const auto& f : eval.folds) CHECK(f.metrics.rmse == doctest::Approx(eval.averaged.rmse));

  const auto failing = leave_one_batch_out(ds, [](const Dataset& train, const Dataset& test) {
    if (test.batch.front() == "b") throw Error(ErrorCode::kSingularMatrix, "fold failure");
    (void)train;
    return test.y;
  });
  CHECK(failing.failed_folds == 1);
  CHECK(failing.folds[1].failed);
  CHECK(failing.pooled_pred.size() == 6);

  auto single = ds;
  single.batch.assign(9, "only");
  CHECK(code_of([&] { leave_one_batch_out(single, {}); }) == ErrorCode::kSingleBatch);
}

TEST_CASE("write_csv round trip") {
  const auto path = (std::filesystem::temp_directory_path() / "cmoe_write_test.csv").string();
  const double tricky = 0.1 + 0.2;
  write_csv(path, {"a", "y"}, {{tricky, 2.0}, {1.0 / 3.0, -1e-300}});
  const auto ds = load_csv(path, {"y", {}, "", "", ','});
  CHECK(ds.x(0, 0) == tricky);
  CHECK(ds.y[0] == 1.0 / 3.0);
  CHECK(ds.y[1] == -1e-300);
}
