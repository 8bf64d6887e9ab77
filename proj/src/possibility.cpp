#include "cmoe/possibility.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>

namespace cmoe {

ContextMatrix::ContextMatrix(Matrix pi, std::vector<std::string> labels)
    : pi_(std::move(pi)), labels_(std::move(labels)) {
  if (labels_.size() != pi_.rows())
    throw Error(ErrorCode::kShapeMismatch, "context labels do not match context count");
  for (double v : pi_.values()) {
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(ErrorCode::kInvalidArgument, "possibility values must lie in [0, 1]");
  }
  for (auto c : unnormalized_rows())
    spdlog::warn("context '{}' never reaches possibility 1", labels_[c]);
}

ContextMatrix ContextMatrix::from_rows(const std::vector<std::vector<double>>& rows,
                                       std::vector<std::string> labels) {
  const std::size_t n = rows.empty() ? 0 : rows.front().size();
  Matrix pi(rows.size(), n);
  for (std::size_t c = 0; c < rows.size(); ++c) {
    if (rows[c].size() != n) throw Error(ErrorCode::kShapeMismatch, "context rows differ in length");
    for (std::size_t i = 0; i < n; ++i) pi(c, i) = rows[c][i];
  }
  return ContextMatrix(std::move(pi), std::move(labels));
}

std::vector<std::size_t> ContextMatrix::unnormalized_rows() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < pi_.rows(); ++c) {
    auto r = pi_.row(c);
    if (r.empty() || *std::max_element(r.begin(), r.end()) < 1.0) out.push_back(c);
  }
  return out;
}

ContextMatrix ContextMatrix::select_samples(std::span<const std::size_t> samples) const {
  Matrix out(pi_.rows(), samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (samples[k] >= n_samples())
      throw Error(ErrorCode::kIndexOutOfRange, "sample " + std::to_string(samples[k]) + " outside context matrix");
    for (std::size_t c = 0; c < pi_.rows(); ++c) out(c, k) = pi_(c, samples[k]);
  }
  return ContextMatrix(std::move(out), labels_);
}

std::vector<double> alpha_certain(const AlphaCertainSpec& spec, std::size_t n_samples) {
  if (spec.member_set.empty()) throw Error(ErrorCode::kInvalidArgument, "alpha-certain member set is empty");
  if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  std::vector<double> row(n_samples, 1.0 - spec.alpha);
  for (auto i : spec.member_set) {
    if (i >= n_samples)
      throw Error(ErrorCode::kIndexOutOfRange,
                  "member " + std::to_string(i) + " outside " + std::to_string(n_samples) + " samples");
    row[i] = 1.0;
  }
  return row;
}

static void validate(const TrapezoidSpec& s) {
  if (!(s.a < s.b && s.b < s.c && s.c < s.d))
    throw Error(ErrorCode::kInvalidArgument, "trapezoid breakpoints must satisfy a < b < c < d");
  if (!(s.beta >= 0.0 && s.beta <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "beta must lie in [0, 1]");
}

double trapezoid_membership(const TrapezoidSpec& s, double x) {
  validate(s);
  const double rise = (x - s.a) / (s.b - s.a);
  const double fall = (s.d - x) / (s.d - s.c);
  return std::clamp(std::min({rise, 1.0, fall}), 0.0, 1.0);
}

std::vector<double> beta_trapezoid(const TrapezoidSpec& spec, std::span<const double> positions) {
  validate(spec);
  std::vector<double> row(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i)
    row[i] = std::max(trapezoid_membership(spec, positions[i]), spec.beta);
  return row;
}

std::vector<double> complete_ignorance(std::size_t n_samples) {
  if (n_samples == 0) throw Error(ErrorCode::kInvalidArgument, "ignorance row needs at least one sample");
  return std::vector<double>(n_samples, 1.0);
}

ConsistencyIndex consistency_index(const Matrix& gates, const ContextMatrix& ctx) {
  if (gates.rows() != ctx.n_contexts() || gates.cols() != ctx.n_samples())
    throw Error(ErrorCode::kShapeMismatch, "gates and context matrix differ in shape");
  const std::size_t n = ctx.n_samples();
  ConsistencyIndex out;
  out.per_context.resize(ctx.n_contexts());
  double log_sum = 0.0;
  bool any_zero = false;
  for (std::size_t c = 0; c < ctx.n_contexts(); ++c) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (gates(c, i) <= ctx(c, i)) ++hits;
    const double ci = n == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(n);
    out.per_context[c] = ci;
    if (ci == 0.0) any_zero = true;
    else log_sum += std::log(ci);
  }
  if (ctx.n_contexts() == 0) out.overall = 1.0;
  else if (any_zero) out.overall = 0.0;
  else out.overall = std::exp(log_sum / static_cast<double>(ctx.n_contexts()));
  // exp(log) can land one ulp away from an exact 1.
  bool all_one = std::all_of(out.per_context.begin(), out.per_context.end(), [](double v) { return v == 1.0; });
  if (all_one) out.overall = 1.0;
  return out;
}

TuneResult tune_certainty(std::span<const double> grid, const CertaintyFitFn& fit_fn, double epsilon) {
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "certainty grid is empty");
  for (double v : grid) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "certainty values must lie in [0, 1]");
  }

  std::vector<TunePoint> table(grid.size());
  const long n = static_cast<long>(grid.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long k = 0; k < n; ++k) {
    try {
      table[k] = fit_fn(grid[k]);
      table[k].certainty = grid[k];
    } catch (const std::exception& e) {
      spdlog::warn("certainty {} failed: {}", grid[k], e.what());
      table[k] = TunePoint{grid[k], 0.0, 0.0, true};
    }
  }

  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto& p = table[k];
    if (p.failed || !(p.consistency >= epsilon) || !std::isfinite(p.cv_error)) continue;
    if (!best) {
      best = k;
      continue;
    }
    const auto& b = table[*best];
    if (p.cv_error < b.cv_error || (p.cv_error == b.cv_error && p.certainty < b.certainty)) best = k;
  }
  if (!best) throw NoFeasiblePoint("no certainty value reaches consistency " + std::to_string(epsilon), table);
  return TuneResult{*best, table[*best].certainty, std::move(table)};
}

}  // namespace cmoe
