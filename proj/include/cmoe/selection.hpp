#pragma once

// Closed-form approximate leave-one-out estimators. For a linear smoother
// with leverage h_i the held-out prediction is (yhat_i - h_i y_i) / (1 - h_i),
// which is exact for weighted least squares; for an l1-penalized fit it is
// evaluated on the active set.

#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "cmoe/linalg.hpp"

namespace cmoe {

// Leverages at or above this are treated as saturated and skipped.
inline constexpr double kLeverageLimit = 1.0 - 1e-10;

struct LooResult {
  double cv = 0.0;                  // weighted sum of squared held-out residuals
  std::vector<double> loo_fit;      // held-out prediction per sample
  std::vector<double> leverage;
  std::size_t skipped = 0;          // samples with leverage >= kLeverageLimit
};

// Expert estimator on the augmented design (column 0 = intercept). The hat
// matrix is built from the intercept plus the nonzero coefficients of theta.
LooResult loocv_expert(const Matrix& design, std::span<const double> y, std::span<const double> w,
                       std::span<const double> theta);

// Gate estimator on the working least-squares problem (z, r). With
// plus_form the held-out score uses (zhat + M_ii z) / (1 - M_ii).
LooResult loocv_gate(const Matrix& design, std::span<const double> r, std::span<const double> z,
                     std::span<const double> v, bool plus_form = false);

// Shared core: the weighted Gram of the full design is supplied so that a
// lambda path does not recompute it.
LooResult press(const Matrix& design, std::span<const double> target, std::span<const double> w,
                std::span<const double> coef, const Matrix& full_gram, bool plus_form = false);

// Whole-model estimate (1/N) sum_i (y_i - sum_c g^(-i)_ci yhat^(-i)_ci)^2 where
// g^(-i) is the softmax over contexts of the held-out gate scores.
// expert_loo and gate_loo are C x N.
double loocv_model(std::span<const double> y, const Matrix& expert_loo, const Matrix& gate_loo);

struct CvCurve {
  std::vector<double> lambdas;
  std::vector<double> cv;                  // NaN where the point failed
  std::vector<std::size_t> active_size;
  std::size_t chosen = 0;

  void write_csv(std::ostream& os) const;
};

struct CurvePoint {
  double cv = 0.0;
  std::size_t active_size = 0;
};

// Evaluates the grid in the order given (callers pass it descending so that
// warm starts flow from sparse to dense) and picks the minimum; ties go to
// the larger lambda. Points returning nullopt or throwing are recorded as
// missing; an error is raised only if every point fails.
using CurveEvaluator = std::function<std::optional<CurvePoint>(std::size_t index, double lambda)>;
CvCurve select_lambda(std::span<const double> grid, const CurveEvaluator& evaluator);

// 'count' log-spaced values from lambda_max down to ratio * lambda_max,
// followed by 0. Returns {0} when lambda_max is 0.
std::vector<double> lambda_grid(double lambda_max, std::size_t count = 30, double ratio = 1e-3);

}  // namespace cmoe
