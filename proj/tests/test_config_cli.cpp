#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cmoe/cli.hpp"
#include "cmoe/config.hpp"
#include "cmoe/error.hpp"

using namespace cmoe;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("cmoe_test_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cmoe");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

// Numeric CSV with a header row.
std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  std::stringstream hs(line);
  for (std::string f; std::getline(hs, f, ',');) header.push_back(f);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> r;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) r.push_back(std::stod(f));
    rows.push_back(r);
  }
  return {header, rows};
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

// Small synthetic problem with short EM runs.
fs::path make_problem(const TempDir& dir, const std::vector<std::string>& extra = {}) {
  std::vector<std::string> args{"synth", "--out", dir.path.string(), "--samples", "240", "--features", "4",
                                "--support", "2", "--seed", "3"};
  args.insert(args.end(), extra.begin(), extra.end());
  REQUIRE(cli(args) == 0);
  const fs::path cfg = dir.path / "config.json";
  auto j = read_json(cfg);
  j["train"]["max_em_iters"] = 8;
  j["evaluate"]["n_perm"] = 200;
  write_json(cfg, j);
  return cfg;
}

}  // namespace

TEST_CASE("config: parsing and validation") {
  const std::string text = R"({
    "data": {"train": "d.csv", "target": "y", "features": ["a", "b"]},
    "lags": {"default": [0, 1]},
    "n_contexts": 2,
    "contexts": [
      {"name": "lo", "kind": "alpha_certain", "alpha": 0.8, "ranges": [[0, 5]]},
      {"name": "hi", "kind": "beta_trapezoid", "beta": 0.1, "trapezoids": [[4, 6, 9, 11]]}
    ],
    "train": {"eta": 0.2, "expert_lambdas": [0.5]},
    "seed": 9
  })";
  const auto cfg = parse_run_config(text, "/base");
  CHECK(cfg.resolve("d.csv") == "/base/d.csv");
  CHECK(cfg.contexts[0].kind == ContextKind::kAlphaCertain);
  CHECK(cfg.contexts[1].trapezoids[0][2] == 9.0);
  CHECK(cfg.train.eta == 0.2);
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.lags.default_delays == std::vector<std::size_t>{0, 1});

  Dataset d;
  d.x = Matrix(12, 1);
  d.y.assign(12, 0.0);
  const auto ctx = build_contexts(cfg, d);
  CHECK(ctx(0, 2) == 1.0);
  CHECK(ctx(0, 7) == doctest::Approx(0.2));
  CHECK(ctx(1, 0) == 0.1);
  CHECK(ctx(1, 5) == 0.5);
  CHECK(ctx(1, 7) == 1.0);
  const auto tuned = build_contexts(cfg, d, 0.0);
  CHECK(tuned(0, 7) == 1.0);
  CHECK(tuned(1, 0) == 0.0);

  auto expect_config_error = [](const std::string& t) {
    try {
      parse_run_config(t);
      FAIL("expected a config error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfigError);
    }
  };
  for (const char* key : {"gate_press_plus_form", "paper_literal_gate_press"}) {
    const auto alt = parse_run_config(std::string(R"({"data": {"train": "d.csv", "target": "y"},
      "contexts": [{"kind": "ignorance"}], "train": {")") + key + R"(": true}})");
    CHECK(alt.train.gate_press_plus_form);
  }

  expect_config_error("[1, 2]");
  expect_config_error("{bad json");
  expect_config_error(R"({"data": {"train": "d.csv", "target": "y"}, "n_contexts": 3,
                          "contexts": [{"kind": "ignorance"}]})");
  expect_config_error(R"({"data": {"train": "d.csv", "target": "y"},
                          "contexts": [{"kind": "alpha_certain", "alpha": 1.5, "ranges": [[0, 1]]}]})");
  expect_config_error(R"({"data": {"train": "d.csv", "target": "y"},
                          "contexts": [{"kind": "beta_trapezoid", "trapezoids": [[3, 2, 1, 0]]}]})");
  expect_config_error(R"({"data": {"train": "d.csv", "target": "y"},
                          "contexts": [{"kind": "ignorance"}], "train": {"eta": -1}})");
}

TEST_CASE("cli: fit then predict reproduces the fitted values") {
  TempDir dir;
  const auto cfg = make_problem(dir);
  const auto out = dir.path / "out";
  REQUIRE(cli({"fit", "--config", cfg.string(), "--out", out.string()}) == 0);
  for (const char* f : {"model.json", "fit_trace.csv", "fitted.csv", "summary.txt"}) CHECK(fs::exists(out / f));

  const auto pred = out / "pred.csv";
  REQUIRE(cli({"predict", "--config", cfg.string(), "--out", out.string(), "--model", (out / "model.json").string(),
               "--predictions", pred.string()}) == 0);
  const auto [header, rows] = read_csv(pred);
  const auto fitted = read_csv(out / "fitted.csv").second;
  REQUIRE(header.size() == 5);
  REQUIRE(rows.size() == fitted.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i][0] == doctest::Approx(fitted[i][1]).epsilon(1e-10));
    CHECK(rows[i][3] + rows[i][4] == doctest::Approx(1.0).epsilon(1e-12));
  }
  // The trace marks exactly one selected iteration.
  const auto trace = read_csv(out / "fit_trace.csv").second;
  int selected = 0;
  for (const auto& r : trace) selected += static_cast<int>(r[3]);
  CHECK(selected == 1);
}

TEST_CASE("cli: evaluate with batches and with a random split") {
  TempDir dir;
  const auto cfg = make_problem(dir, {"--batches", "3"});
  const auto out = dir.path / "out";
  REQUIRE(cli({"evaluate", "--config", cfg.string(), "--out", out.string()}) == 0);
  CHECK(fs::exists(out / "folds.csv"));
  std::ifstream m(out / "metrics.csv");
  std::string all((std::istreambuf_iterator<char>(m)), {});
  CHECK(all.find("lasso") != std::string::npos);

  TempDir plain;
  const auto cfg2 = make_problem(plain);
  const auto out2 = plain.path / "out";
  REQUIRE(cli({"evaluate", "--config", cfg2.string(), "--out", out2.string()}) == 0);
  CHECK(read_csv(out2 / "test_predictions.csv").second.size() == 72);
}

TEST_CASE("cli: tune-certainty") {
  TempDir dir;
  const auto cfg = make_problem(dir);
  auto j = read_json(cfg);
  j["tune"]["grid"] = {0.0, 0.5, 1.0};
  j["tune"]["epsilon"] = 0.5;
  write_json(cfg, j);
  const auto out = dir.path / "out";
  REQUIRE(cli({"tune-certainty", "--config", cfg.string(), "--out", out.string()}) == 0);
  const auto table = read_csv(out / "tune.csv").second;
  CHECK(table.size() == 3);
  CHECK(table[0][2] == 1.0);

  // Only full ignorance reaches C_I = 1 exactly.
  j["tune"]["grid"] = {0.5, 1.0};
  j["tune"]["epsilon"] = 1.0;
  write_json(cfg, j);
  CHECK(cli({"tune-certainty", "--config", cfg.string(), "--out", out.string()}) == kExitInfeasible);
  int selected = 0;
  for (const auto& r : read_csv(out / "tune.csv").second) selected += static_cast<int>(r[4]);
  CHECK(selected == 0);
}

TEST_CASE("cli: input errors exit with code 2") {
  TempDir dir;
  const auto cfg = make_problem(dir);
  CHECK(cli({"fit"}) == kExitInput);
  CHECK(cli({"fit", "--config", (dir.path / "missing.json").string()}) == kExitInput);
  CHECK(cli({"bogus"}) == kExitInput);

  auto j = read_json(cfg);
  j["data"]["train"] = "nowhere.csv";
  write_json(cfg, j);
  CHECK(cli({"fit", "--config", cfg.string()}) == kExitInput);

  j = read_json(cfg);
  j["data"]["train"] = "data.csv";
  j["n_contexts"] = 5;
  write_json(cfg, j);
  CHECK(cli({"fit", "--config", cfg.string()}) == kExitInput);

  j["n_contexts"] = 2;
  j["data"]["target"] = "not_a_column";
  write_json(cfg, j);
  CHECK(cli({"fit", "--config", cfg.string()}) == kExitInput);
}
