#include "cmoe/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "cmoe/error.hpp"
#include "cmoe/model.hpp"

namespace cmoe {

double soft_threshold(double z, double eta) {
  if (z > eta) return z - eta;
  if (z < -eta) return z + eta;
  return 0.0;
}

namespace {

// Exact re-solve on the active set with the signs found by coordinate
// descent. Returns false if the result violates the sign pattern or the
// inactive-coordinate bound, in which case the caller keeps its iterate.
bool polish_solution(const kernels::WeightedGram& sys, double lambda, std::vector<double>& coef) {
  const std::size_t p = coef.size();
  std::vector<std::size_t> cols{0};
  for (std::size_t j = 1; j < p; ++j)
    if (coef[j] != 0.0) cols.push_back(j);
  const std::size_t k = cols.size();
  Matrix a(k, k);
  std::vector<double> rhs(k);
  for (std::size_t u = 0; u < k; ++u) {
    for (std::size_t v = 0; v < k; ++v) a(u, v) = sys.gram(cols[u], cols[v]);
    const double sign = cols[u] == 0 ? 0.0 : (coef[cols[u]] > 0.0 ? 1.0 : -1.0);
    rhs[u] = sys.rhs[cols[u]] - lambda * sign;
  }
  std::vector<double> sol;
  try {
    sol = LuFactorization(std::move(a)).solve(rhs);
  } catch (const Error&) {
    return false;
  }
  std::vector<double> cand(p, 0.0);
  for (std::size_t u = 0; u < k; ++u) {
    if (!std::isfinite(sol[u])) return false;
    if (cols[u] != 0 && (sol[u] == 0.0 || (sol[u] > 0.0) != (coef[cols[u]] > 0.0))) return false;
    cand[cols[u]] = sol[u];
  }
  const double slack = 1e-9 * (1.0 + lambda);
  for (std::size_t j = 1; j < p; ++j) {
    if (cand[j] != 0.0 || sys.gram(j, j) == 0.0) continue;
    double grad = sys.rhs[j];
    for (std::size_t l = 0; l < p; ++l) grad -= sys.gram(j, l) * cand[l];
    if (std::abs(grad) > lambda + slack) return false;
  }
  coef = std::move(cand);
  return true;
}

}  // namespace

CgdResult solve_weighted_lasso(const kernels::WeightedGram& sys, double lambda, std::span<const double> init,
                               const CgdOptions& options) {
  const std::size_t p = sys.rhs.size();
  if (sys.gram.rows() != p || sys.gram.cols() != p)
    throw Error(ErrorCode::kDimensionMismatch, "lasso: Gram and rhs sizes differ");
  if (init.size() != p) throw Error(ErrorCode::kDimensionMismatch, "lasso: initial coefficient length differs");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "lasso: lambda must be nonnegative");
  if (!(sys.gram(0, 0) > 0.0)) throw Error(ErrorCode::kAllZeroWeights, "lasso: all sample weights are zero");

  CgdResult out;
  out.coef.assign(init.begin(), init.end());
  auto& b = out.coef;
  for (std::size_t j = 1; j < p; ++j)
    if (sys.gram(j, j) == 0.0) b[j] = 0.0;

  // q = G b, maintained incrementally.
  std::vector<double> q(p, 0.0);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t l = 0; l < p; ++l) q[j] += sys.gram(j, l) * b[l];

  auto update = [&](std::size_t j, double value) {
    const double delta = value - b[j];
    if (delta == 0.0) return 0.0;
    b[j] = value;
    for (std::size_t l = 0; l < p; ++l) q[l] += delta * sys.gram(l, j);
    return std::abs(delta);
  };

  for (out.cycles = 1; out.cycles <= options.max_cycles; ++out.cycles) {
    double max_change = 0.0;
    const double g00 = sys.gram(0, 0);
    max_change = std::max(max_change, update(0, (sys.rhs[0] - (q[0] - g00 * b[0])) / g00));
    for (std::size_t j = 1; j < p; ++j) {
      const double gjj = sys.gram(j, j);
      if (gjj == 0.0) continue;
      const double z = sys.rhs[j] - (q[j] - gjj * b[j]);
      max_change = std::max(max_change, update(j, soft_threshold(z, lambda) / gjj));
    }
    if (max_change < options.tol) {
      out.converged = true;
      break;
    }
  }
  out.cycles = std::min(out.cycles, options.max_cycles);
  if (options.polish && out.converged) out.polished = polish_solution(sys, lambda, out.coef);
  return out;
}

double lambda_max(const kernels::WeightedGram& sys) {
  const std::size_t p = sys.rhs.size();
  if (!(sys.gram(0, 0) > 0.0)) return 0.0;
  const double intercept = sys.rhs[0] / sys.gram(0, 0);
  double m = 0.0;
  for (std::size_t j = 1; j < p; ++j) m = std::max(m, std::abs(sys.rhs[j] - sys.gram(j, 0) * intercept));
  return m;
}

PenalizedFit fit_penalized_path(const Matrix& design, std::span<const double> target, std::span<const double> w,
                                std::span<const double> init, const PathOptions& options) {
  const auto sys = kernels::weighted_gram(design, w, target);
  if (!(sys.gram(0, 0) > 0.0)) throw Error(ErrorCode::kAllZeroWeights, "all sample weights are zero");

  std::vector<double> grid = options.lambdas;
  if (grid.empty()) grid = lambda_grid(lambda_max(sys), options.grid_size, options.min_ratio);
  std::sort(grid.begin(), grid.end(), std::greater<>());

  std::vector<std::vector<double>> coefs(grid.size());
  std::vector<LooResult> loos(grid.size());
  std::vector<bool> converged(grid.size(), false);
  std::vector<double> warm(init.begin(), init.end());

  PenalizedFit fit;
  fit.curve = select_lambda(grid, [&](std::size_t k, double lambda) -> std::optional<CurvePoint> {
    auto res = solve_weighted_lasso(sys, lambda, warm, options.cgd);
    warm = res.coef;
    converged[k] = res.converged;
    coefs[k] = std::move(res.coef);
    loos[k] = press(design, target, w, coefs[k], sys.gram, options.press_plus_form);
    return CurvePoint{loos[k].cv, active_set(coefs[k]).size()};
  });
  const std::size_t k = fit.curve.chosen;
  fit.coef = std::move(coefs[k]);
  fit.loo = std::move(loos[k]);
  fit.lambda = grid[k];
  fit.converged = converged[k];
  return fit;
}

double LassoModel::predict(std::span<const double> x_raw) const {
  const auto x = scaler.scale_features(x_raw);
  double s = theta[0];
  for (std::size_t j = 0; j < x.size(); ++j) s += theta[j + 1] * x[j];
  return scaler.unscale_target(s);
}

std::vector<double> LassoModel::predict(const Dataset& raw) const {
  if (raw.scaled()) throw Error(ErrorCode::kStateError, "predict expects unscaled data");
  std::vector<double> out(raw.n_samples());
  for (std::size_t i = 0; i < raw.n_samples(); ++i) out[i] = predict(raw.x.row(i));
  return out;
}

LassoModel fit_lasso(const Dataset& data, const PathOptions& options) {
  const Dataset scaled = data.scaled() ? data : autoscale_apply(autoscale_fit(data), data);
  const Matrix design = augment_intercept(scaled.x);
  const std::vector<double> w(scaled.n_samples(), 1.0);
  const std::vector<double> init(design.cols(), 0.0);
  auto fit = fit_penalized_path(design, scaled.y, w, init, options);
  LassoModel model;
  model.scaler = *scaled.scaler;
  model.feature_names = scaled.feature_names;
  model.theta = std::move(fit.coef);
  model.lambda = fit.lambda;
  model.curve = std::move(fit.curve);
  return model;
}

}  // namespace cmoe
