#include "cmoe/selection.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <exception>
#include <limits>

#include "cmoe/error.hpp"
#include "cmoe/kernels.hpp"
#include "cmoe/model.hpp"

namespace cmoe {

LooResult press(const Matrix& design, std::span<const double> target, std::span<const double> w,
                std::span<const double> coef, const Matrix& full_gram, bool plus_form) {
  const std::size_t n = design.rows();
  if (target.size() != n || w.size() != n)
    throw Error(ErrorCode::kDimensionMismatch, "press: target/weight length differs from rows");
  if (coef.size() != design.cols())
    throw Error(ErrorCode::kDimensionMismatch, "press: coefficient length differs from columns");

  std::vector<std::size_t> cols{0};
  for (auto j : active_set(coef)) cols.push_back(j);
  Matrix sub(cols.size(), cols.size());
  for (std::size_t a = 0; a < cols.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) sub(a, b) = full_gram(cols[a], cols[b]);
  const Matrix inv = LuFactorization(std::move(sub)).inverse();

  LooResult out;
  out.leverage = kernels::hat_diagonal(design, cols, w, inv);
  out.loo_fit.resize(n);
  double sum = 0.0, w_all = 0.0, w_kept = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double fit = dot(design.row(i), coef);
    const double h = out.leverage[i];
    w_all += w[i];
    if (h >= kLeverageLimit) {
      ++out.skipped;
      out.loo_fit[i] = fit;
      continue;
    }
    const double loo = plus_form ? (fit + h * target[i]) / (1.0 - h) : (fit - h * target[i]) / (1.0 - h);
    out.loo_fit[i] = loo;
    const double e = target[i] - loo;
    sum += w[i] * e * e;
    w_kept += w[i];
  }
  if (out.skipped > 0) {
    spdlog::debug("press: {} samples with leverage ~1 skipped", out.skipped);
    out.cv = w_kept > 0.0 ? sum * (w_all / w_kept) : std::numeric_limits<double>::quiet_NaN();
  } else {
    out.cv = sum;
  }
  return out;
}

LooResult loocv_expert(const Matrix& design, std::span<const double> y, std::span<const double> w,
                       std::span<const double> theta) {
  const auto sys = kernels::weighted_gram(design, w, y);
  return press(design, y, w, theta, sys.gram, false);
}

LooResult loocv_gate(const Matrix& design, std::span<const double> r, std::span<const double> z,
                     std::span<const double> v, bool plus_form) {
  const auto sys = kernels::weighted_gram(design, r, z);
  return press(design, z, r, v, sys.gram, plus_form);
}

double loocv_model(std::span<const double> y, const Matrix& expert_loo, const Matrix& gate_loo) {
  const std::size_t n = y.size();
  const std::size_t c = expert_loo.rows();
  if (expert_loo.cols() != n || gate_loo.cols() != n || gate_loo.rows() != c)
    throw Error(ErrorCode::kShapeMismatch, "loocv_model: leave-one-out pieces disagree on C x N");
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "loocv_model: no samples");
  const Matrix g = kernels::softmax_columns(gate_loo);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = 0.0;
    for (std::size_t k = 0; k < c; ++k) pred += g(k, i) * expert_loo(k, i);
    sum += (y[i] - pred) * (y[i] - pred);
  }
  return sum / static_cast<double>(n);
}

void CvCurve::write_csv(std::ostream& os) const {
  os << "lambda,cv,active_size,chosen\n";
  for (std::size_t k = 0; k < lambdas.size(); ++k)
    os << fmt::format("{:.17g},{:.17g},{},{}\n", lambdas[k], cv[k], active_size[k], k == chosen ? 1 : 0);
}

CvCurve select_lambda(std::span<const double> grid, const CurveEvaluator& evaluator) {
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "lambda grid is empty");
  CvCurve curve;
  curve.lambdas.assign(grid.begin(), grid.end());
  curve.cv.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  curve.active_size.assign(grid.size(), 0);
  std::optional<std::size_t> best;
  std::string last_error;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::optional<CurvePoint> point;
    try {
      point = evaluator(k, grid[k]);
    } catch (const std::exception& e) {
      last_error = e.what();
    }
    if (!point || !std::isfinite(point->cv)) continue;
    curve.cv[k] = point->cv;
    curve.active_size[k] = point->active_size;
    if (!best) {
      best = k;
      continue;
    }
    const double bl = grid[*best], bc = curve.cv[*best];
    if (point->cv < bc || (point->cv == bc && grid[k] > bl)) best = k;
  }
  if (!best) throw Error(ErrorCode::kSingularMatrix, "every lambda grid point failed: " + last_error);
  curve.chosen = *best;
  return curve;
}

std::vector<double> lambda_grid(double lambda_max, std::size_t count, double ratio) {
  if (!(lambda_max > 0.0) || count == 0) return {0.0};
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lambda_max;
  } else {
    const double step = std::log(ratio) / static_cast<double>(count - 1);
    for (std::size_t k = 0; k < count; ++k) grid[k] = lambda_max * std::exp(step * static_cast<double>(k));
  }
  grid.push_back(0.0);
  return grid;
}

}  // namespace cmoe
