#include "cmoe/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "cmoe/error.hpp"

namespace cmoe {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::kLengthMismatch, fmt::format("lengths {} and {} differ", a.size(), b.size()));
  if (a.empty()) throw Error(ErrorCode::kLengthMismatch, "empty input");
}

}  // namespace

double rmse(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

double r2(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sse += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    sst += (y[i] - mean) * (y[i] - mean);
  }
  if (sst == 0.0) throw Error(ErrorCode::kZeroVariance, "R2 is undefined for a constant target");
  return 1.0 - sse / sst;
}

double mae(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  double m = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) m = std::max(m, std::abs(y[i] - yhat[i]));
  return m;
}

double mean_abs_error(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

MetricSet compute_metrics(std::span<const double> y, std::span<const double> yhat) {
  MetricSet m;
  m.rmse = rmse(y, yhat);
  m.mae = mae(y, yhat);
  try {
    m.r2 = r2(y, yhat);
  } catch (const Error&) {
    m.r2 = std::numeric_limits<double>::quiet_NaN();
  }
  return m;
}

double randomization_test(std::span<const double> err_a, std::span<const double> err_b, std::size_t n_perm,
                          std::uint64_t seed) {
  if (err_a.size() != err_b.size())
    throw Error(ErrorCode::kLengthMismatch, "residual vectors differ in length");
  if (err_a.size() < 2) throw Error(ErrorCode::kLengthMismatch, "randomization test needs at least 2 samples");
  if (n_perm == 0) throw Error(ErrorCode::kInvalidArgument, "n_perm must be positive");

  const std::size_t n = err_a.size();
  std::vector<double> d(n);
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = err_a[i] * err_a[i] - err_b[i] * err_b[i];
    scale += std::abs(d[i]);
  }
  double observed = 0.0;
  for (double v : d) observed += v;
  observed = std::abs(observed);
  // Sums of sign-flipped terms can differ from the observed sum by rounding.
  const double slack = 1e-12 * scale;

  std::mt19937_64 rng(seed);
  std::size_t extreme = 0;
  for (std::size_t k = 0; k < n_perm; ++k) {
    double s = 0.0;
    std::uint64_t bits = 0;
    int left = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (left == 0) {
        bits = rng();
        left = 64;
      }
      s += (bits & 1u) ? -d[i] : d[i];
      bits >>= 1;
      --left;
    }
    if (std::abs(s) >= observed - slack) ++extreme;
  }
  return static_cast<double>(1 + extreme) / static_cast<double>(1 + n_perm);
}

void EvalReport::write_csv(std::ostream& os) const {
  os << "model,r2,rmse,mae,p_value\n";
  for (const auto& m : models)
    os << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", m.name, m.metrics.r2, m.metrics.rmse,
                      m.metrics.mae, m.p_value);
}

void EvalReport::write_table(std::ostream& os) const {
  os << fmt::format("{:<8}", "");
  for (const auto& m : models) os << fmt::format("{:>10}", m.name);
  os << '\n';
  auto row = [&](const char* label, auto get) {
    os << fmt::format("{:<8}", label);
    for (const auto& m : models) os << fmt::format("{:>10.3f}", get(m));
    os << '\n';
  };
  row("R2", [](const ModelScore& m) { return m.metrics.r2; });
  row("RMSE", [](const ModelScore& m) { return m.metrics.rmse; });
  row("MAE", [](const ModelScore& m) { return m.metrics.mae; });
  row("p-value", [](const ModelScore& m) { return m.p_value; });
}

}  // namespace cmoe
