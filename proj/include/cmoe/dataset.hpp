#pragma once

// Tabular data ingestion and the preprocessing used around model training:
// auto-scaling, time-lag features and batch-aware evaluation.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmoe/linalg.hpp"
#include "cmoe/metrics.hpp"

namespace cmoe {

// Per-feature and target mean/stdev learned on training data.
struct Scaler {
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  double target_mean = 0.0;
  double target_std = 1.0;

  std::size_t n_features() const noexcept { return feature_mean.size(); }
  std::vector<double> scale_features(std::span<const double> x) const;
  double scale_target(double y) const { return (y - target_mean) / target_std; }
  double unscale_target(double y) const { return y * target_std + target_mean; }
};

struct Dataset {
  Matrix x;                                  // N x d
  std::vector<double> y;                     // N
  std::vector<std::string> feature_names;    // d
  std::string target_name = "y";
  std::vector<std::string> batch;            // empty or N
  std::vector<double> time;                  // empty or N
  std::vector<std::size_t> sample_index;     // original row of each sample
  std::optional<Scaler> scaler;              // set once the data is scaled
  std::size_t dropped_missing_target = 0;

  std::size_t n_samples() const noexcept { return y.size(); }
  std::size_t n_features() const noexcept { return x.cols(); }
  bool scaled() const noexcept { return scaler.has_value(); }
  bool has_batches() const noexcept { return !batch.empty(); }

  // Throws on NaN/Inf or inconsistent lengths.
  void validate() const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

struct CsvSchema {
  std::string target;
  std::vector<std::string> features;  // empty = every other numeric column
  std::string batch_column;           // optional
  std::string time_column;            // optional
  char delimiter = ',';
};

// Rows whose target cell is empty or NA/NaN are dropped and counted; any other
// missing or non-numeric cell is an error naming the row and column.
Dataset load_csv(const std::string& path, const CsvSchema& schema);
Dataset parse_csv(std::istream& in, const CsvSchema& schema, const std::string& source = "<stream>");

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

// Stdev uses the N - 1 denominator.
Scaler autoscale_fit(const Dataset& train);
Dataset autoscale_apply(const Scaler& scaler, const Dataset& data);
Dataset autoscale_invert(const Dataset& data);

// Design matrix with a leading column of ones.
Matrix augment_intercept(const Matrix& x);

struct LagSpec {
  std::vector<std::size_t> default_delays{0};
  std::map<std::string, std::vector<std::size_t>> per_variable;

  const std::vector<std::size_t>& delays_for(const std::string& name) const;
  void validate() const;
};

// Feature (v, delta) in output row r equals variable v at input row
// r + max_delay - delta. The first max_delay rows are dropped; sample_index,
// batch and time follow the kept rows.
Dataset lag_features(const Dataset& data, const LagSpec& spec);

// Per-fold outcome of a batch-held-out evaluation.
struct FoldResult {
  std::string batch;
  std::size_t n_test = 0;
  bool failed = false;
  std::string error;
  MetricSet metrics;
  std::vector<double> y_true;
  std::vector<double> y_pred;
};

struct BatchEvaluation {
  std::vector<FoldResult> folds;
  MetricSet averaged;                 // mean of per-fold metrics
  std::vector<double> pooled_true;    // concatenated test targets
  std::vector<double> pooled_pred;    // concatenated predictions
  std::size_t failed_folds = 0;
};

// Returns predictions in original target units for the test rows.
using FitEvalFn = std::function<std::vector<double>(const Dataset& train, const Dataset& test)>;

// Holds out each batch in turn. Folds may run concurrently; fit_eval must be
// safe to invoke from several threads.
BatchEvaluation leave_one_batch_out(const Dataset& data, const FitEvalFn& fit_eval);

// Unique batch labels in order of first appearance.
std::vector<std::string> batch_labels(const Dataset& data);

}  // namespace cmoe
