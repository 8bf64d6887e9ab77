#pragma once

// Run configuration: one JSON document per experiment holding the data
// schema, lags, context definitions and every training knob.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cmoe/dataset.hpp"
#include "cmoe/em.hpp"
#include "cmoe/possibility.hpp"

namespace cmoe {

enum class ContextKind { kAlphaCertain, kBetaTrapezoid, kIgnorance };

struct ContextDef {
  std::string name;
  ContextKind kind = ContextKind::kIgnorance;
  // alpha_certain: half-open [begin, end) ranges of original sample indices.
  double alpha = 1.0;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  // beta_trapezoid: union of trapezoids (a, b, c, d), optionally complemented.
  double beta = 0.0;
  std::vector<std::array<double, 4>> trapezoids;
  bool complement = false;
  bool time_coordinate = false;  // positions are time stamps instead of sample indices
};

struct TuneConfig {
  std::vector<double> grid;
  double epsilon = 0.9;
};

struct EvaluateConfig {
  double test_fraction = 0.3;  // random split when there is no test file and no batches
  std::size_t n_perm = 2000;
};

struct RunConfig {
  std::string base_dir;  // relative paths resolve against this
  std::string train_path;
  std::string test_path;  // optional
  CsvSchema schema;
  LagSpec lags;
  std::size_t n_contexts = 0;
  std::vector<ContextDef> contexts;
  TrainConfig train;
  TuneConfig tune;
  EvaluateConfig evaluate;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  std::string resolve(const std::string& path) const;
  void validate() const;
};

RunConfig parse_run_config(const std::string& text, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

// Loads the training file and applies the lag transform.
Dataset load_training_data(const RunConfig& config);
Dataset load_test_data(const RunConfig& config);

// Possibility rows for the samples of data (looked up through sample_index or
// time). A certainty value, when given, replaces alpha or beta of every
// non-ignorance context.
ContextMatrix build_contexts(const RunConfig& config, const Dataset& data,
                             std::optional<double> certainty = std::nullopt);

}  // namespace cmoe
