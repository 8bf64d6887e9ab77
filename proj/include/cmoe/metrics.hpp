#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace cmoe {

double rmse(std::span<const double> y, std::span<const double> yhat);
// 1 - SSE/SST; throws ZeroVariance when y is constant.
double r2(std::span<const double> y, std::span<const double> yhat);
// Maximum absolute error (the "MAE" reported in model comparison tables).
double mae(std::span<const double> y, std::span<const double> yhat);
// Conventional mean absolute error, exposed separately to avoid confusion.
double mean_abs_error(std::span<const double> y, std::span<const double> yhat);

struct MetricSet {
  double rmse = 0.0;
  double r2 = 0.0;  // NaN when the target is constant
  double mae = 0.0;
};

MetricSet compute_metrics(std::span<const double> y, std::span<const double> yhat);

// Paired sign-flip randomization test on squared errors. Two-sided
// p = (1 + #{|mean(d*)| >= |mean(d)|}) / (1 + n_perm).
double randomization_test(std::span<const double> err_a, std::span<const double> err_b, std::size_t n_perm,
                          std::uint64_t seed);

struct ModelScore {
  std::string name;
  MetricSet metrics;
  double p_value = 1.0;  // against the reference model
};

struct EvalReport {
  std::string reference;
  std::vector<ModelScore> models;

  void write_csv(std::ostream& os) const;
  // Rows R2 / RMSE / MAE / p-value, one column per model.
  void write_table(std::ostream& os) const;
};

}  // namespace cmoe
