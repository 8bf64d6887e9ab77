#pragma once

// Weighted l1-penalized least squares by coordinate descent:
//   minimize 1/2 sum_i w_i (t_i - x_i' b)^2 + lambda sum_{j>=1} |b_j|
// on an augmented design whose column 0 is an unpenalized intercept.
// Experts solve it with (y, pi*gamma); gates with the Newton working
// response (z, r).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cmoe/dataset.hpp"
#include "cmoe/kernels.hpp"
#include "cmoe/selection.hpp"

namespace cmoe {

double soft_threshold(double z, double eta);

struct CgdOptions {
  double tol = 1e-6;                 // on the max coefficient change per cycle
  std::size_t max_cycles = 10000;
  // Re-solve the active-set stationarity equations exactly once the sign
  // pattern has settled (kept only if signs and inactive bounds still hold).
  bool polish = true;
};

struct CgdResult {
  std::vector<double> coef;
  std::size_t cycles = 0;
  bool converged = false;
  bool polished = false;
};

// Coordinate descent on the normal equations (covariance updates): the
// partial residual sum for coordinate j is rhs_j - sum_{l != j} G_jl b_l.
CgdResult solve_weighted_lasso(const kernels::WeightedGram& system, double lambda,
                               std::span<const double> init, const CgdOptions& options = {});

// Smallest lambda at which every penalized coefficient is zero:
// max_j |sum_i w_i x_ij (t_i - tbar_w)|.
double lambda_max(const kernels::WeightedGram& system);

// Solution of one penalized problem together with its leave-one-out pieces.
struct PenalizedFit {
  std::vector<double> coef;
  double lambda = 0.0;
  CvCurve curve;
  LooResult loo;
  bool converged = true;
};

struct PathOptions {
  std::vector<double> lambdas;  // empty: automatic grid from lambda_max
  std::size_t grid_size = 30;
  double min_ratio = 1e-3;
  CgdOptions cgd;
  bool press_plus_form = false;
};

// Fits every lambda of the grid (descending, warm-started from init) and
// keeps the one with the lowest leave-one-out estimate.
PenalizedFit fit_penalized_path(const Matrix& design, std::span<const double> target, std::span<const double> w,
                                std::span<const double> init, const PathOptions& options);

// Plain LASSO baseline on auto-scaled data.
struct LassoModel {
  Scaler scaler;
  std::vector<std::string> feature_names;
  std::vector<double> theta;  // scaled units, intercept first
  double lambda = 0.0;
  CvCurve curve;

  double predict(std::span<const double> x_raw) const;
  std::vector<double> predict(const Dataset& raw) const;
};

LassoModel fit_lasso(const Dataset& data, const PathOptions& options);

}  // namespace cmoe
