#include "cmoe/em.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>

#include "cmoe/error.hpp"
#include "cmoe/kernels.hpp"

namespace cmoe {

namespace {

constexpr double kSigma2Floor = 1e-8;

double log_sum_exp(std::span<const double> s) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : s) m = std::max(m, v);
  double t = 0.0;
  for (double v : s) t += std::exp(v - m);
  return m + std::log(t);
}

double weighted_sigma2(const Matrix& design, std::span<const double> y, std::span<const double> w,
                       std::span<const double> theta) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double r = y[i] - dot(design.row(i), theta);
    num += w[i] * r * r;
    den += w[i];
  }
  return std::max(den > 0.0 ? num / den : kSigma2Floor, kSigma2Floor);
}

std::vector<double> row_copy(const Matrix& m, std::size_t r) {
  const auto s = m.row(r);
  return {s.begin(), s.end()};
}

// gamma0_ci proportional to pi_ci. Contexts sharing an identical pi row
// cannot be told apart by pi alone, so each gets a random tilt along the
// features to break the symmetry.
Matrix initial_gamma(const ContextMatrix& ctx, const Matrix& design, std::uint64_t seed) {
  const std::size_t k = ctx.n_contexts(), n = ctx.n_samples(), p = design.cols();
  Matrix g = ctx.pi();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (std::size_t c = 0; c < k; ++c) {
    bool tied = false;
    for (std::size_t o = 0; o < k && !tied; ++o)
      if (o != c) tied = std::ranges::equal(ctx.pi().row(o), ctx.pi().row(c));
    if (!tied || p < 2) continue;
    std::vector<double> u(p, 0.0);
    double norm = 0.0;
    for (std::size_t j = 1; j < p; ++j) {
      u[j] = normal(rng);
      norm += u[j] * u[j];
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) g(c, i) *= std::exp(3.0 * dot(design.row(i), u) / norm);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double t = 0.0;
    for (std::size_t c = 0; c < k; ++c) t += g(c, i);
    for (std::size_t c = 0; c < k; ++c) g(c, i) = t > 0.0 ? g(c, i) / t : 0.0;
  }
  return g;
}

std::vector<ExpertStep> fit_experts(const TrainingData& data, const Matrix& weights, const CmoeModel& current,
                                    const TrainConfig& config, const std::vector<double>* frozen) {
  const std::size_t k = weights.rows();
  std::vector<ExpertStep> steps(k);
  std::vector<std::exception_ptr> errors(k);
#pragma omp parallel for schedule(dynamic) if (k > 1)
  for (std::size_t c = 0; c < k; ++c) {
    try {
      PathOptions opt = config.expert_path();
      if (frozen) opt.lambdas = {(*frozen)[c]};
      steps[c] = m_step_expert(data, weights.row(c), current.experts[c].theta, opt);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (!errors[c]) continue;
    try {
      std::rethrow_exception(errors[c]);
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("expert {}: {}", c, e.what()));
    }
  }
  return steps;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorCode::kConfigError, "eta must lie in (0, 1]");
  if (!(xi > 0.0 && xi < 0.5)) throw Error(ErrorCode::kConfigError, "xi must lie in (0, 0.5)");
  if (n_it < 1) throw Error(ErrorCode::kConfigError, "n_it must be at least 1");
  if (max_em_iters < 1) throw Error(ErrorCode::kConfigError, "max_em_iters must be at least 1");
  if (max_newton_cycles < 1) throw Error(ErrorCode::kConfigError, "max_newton_cycles must be at least 1");
  if (!(cgd_tol > 0.0)) throw Error(ErrorCode::kConfigError, "cgd_tol must be positive");
  if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0))
    throw Error(ErrorCode::kConfigError, "lambda_min_ratio must lie in (0, 1)");
  for (const auto* grid : {&expert_lambdas, &gate_lambdas})
    for (double l : *grid)
      if (!(l >= 0.0) || !std::isfinite(l)) throw Error(ErrorCode::kConfigError, "lambdas must be finite and >= 0");
}

PathOptions TrainConfig::expert_path() const {
  PathOptions o;
  o.lambdas = expert_lambdas;
  o.grid_size = lambda_grid_size;
  o.min_ratio = lambda_min_ratio;
  o.cgd.tol = cgd_tol;
  o.cgd.max_cycles = max_cgd_cycles;
  return o;
}

PathOptions TrainConfig::gate_path() const {
  PathOptions o = expert_path();
  o.lambdas = gate_lambdas;
  o.press_plus_form = gate_press_plus_form;
  return o;
}

TrainingData TrainingData::from(const Dataset& scaled) {
  return {augment_intercept(scaled.x), scaled.y};
}

Responsibilities e_step(const CmoeModel& model, const TrainingData& data, const ContextMatrix& ctx) {
  if (ctx.n_contexts() != model.n_contexts() || ctx.n_samples() != data.n_samples())
    throw Error(ErrorCode::kShapeMismatch, "e_step: context matrix does not match model and data");
  std::vector<double> sigma2(model.n_contexts());
  for (std::size_t c = 0; c < sigma2.size(); ++c) sigma2[c] = model.experts[c].sigma2;
  auto r = kernels::responsibilities(ctx.pi(), gate_matrix(model, data.design), expert_matrix(model, data.design),
                                     data.y, sigma2);
  return {std::move(r.gamma), std::move(r.phi), std::move(r.log_mix)};
}

double weighted_log_likelihood(const CmoeModel& model, const TrainingData& data, const ContextMatrix& ctx) {
  const auto r = e_step(model, data, ctx);
  double s = 0.0;
  for (double v : r.log_mix) s += v;
  return s;
}

Matrix context_weights(const ContextMatrix& ctx, const Responsibilities& resp) {
  Matrix w(ctx.n_contexts(), ctx.n_samples());
  for (std::size_t c = 0; c < w.rows(); ++c)
    for (std::size_t i = 0; i < w.cols(); ++i) w(c, i) = ctx(c, i) * resp.gamma(c, i);
  return w;
}

ExpertStep m_step_expert(const TrainingData& data, std::span<const double> weights, double lambda,
                         std::span<const double> theta_init, const CgdOptions& options) {
  const auto sys = kernels::weighted_gram(data.design, weights, data.y);
  auto res = solve_weighted_lasso(sys, lambda, theta_init, options);
  if (!res.converged) spdlog::warn("expert coordinate descent stopped after {} cycles", res.cycles);
  ExpertStep step;
  step.expert.theta = std::move(res.coef);
  step.expert.sigma2 = weighted_sigma2(data.design, data.y, weights, step.expert.theta);
  step.lambda = lambda;
  step.converged = res.converged;
  step.loo = press(data.design, data.y, weights, step.expert.theta, sys.gram);
  step.curve.lambdas = {lambda};
  step.curve.cv = {step.loo.cv};
  step.curve.active_size = {active_set(step.expert.theta).size()};
  return step;
}

ExpertStep m_step_expert(const TrainingData& data, std::span<const double> weights, std::span<const double> theta_init,
                         const PathOptions& options) {
  auto fit = fit_penalized_path(data.design, data.y, weights, theta_init, options);
  ExpertStep step;
  step.expert.sigma2 = weighted_sigma2(data.design, data.y, weights, fit.coef);
  step.expert.theta = std::move(fit.coef);
  step.lambda = fit.lambda;
  step.curve = std::move(fit.curve);
  step.loo = std::move(fit.loo);
  step.converged = fit.converged;
  return step;
}

WorkingResponse working_response(std::size_t c, const Matrix& scores, const Matrix& gates, const Matrix& weights,
                                 std::span<const double> phi, double eta, double xi) {
  const std::size_t n = scores.cols();
  WorkingResponse out;
  out.r.resize(n);
  out.z.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gates(c, i);
    const double r = phi[i] * g * (1.0 - g);
    if (g < xi || g > 1.0 - xi || !(r >= xi)) {
      out.r[i] = xi;
      out.z[i] = scores(c, i);
      ++out.clamped;
      continue;
    }
    out.r[i] = r;
    out.z[i] = scores(c, i) + eta * (weights(c, i) - phi[i] * g) / r;
  }
  return out;
}

namespace {

constexpr int kMaxBacktracks = 30;

double penalized_gate_objective(const Matrix& v, std::size_t c, double penalty, const Matrix& design,
                                const Matrix& weights) {
  double l1 = 0.0;
  for (std::size_t j = 1; j < v.cols(); ++j) l1 += std::abs(v(c, j));
  return gate_objective(v, design, weights) - penalty * l1;
}

}  // namespace

GateStep m_step_gates(const GateModel& gates, const TrainingData& data, const Responsibilities& resp,
                      const ContextMatrix& ctx, const TrainConfig& config, std::span<const double> lambda_fixed) {
  const std::size_t k = gates.n_contexts(), n = data.n_samples();
  if (gates.v.cols() != data.design.cols())
    throw Error(ErrorCode::kDimensionMismatch, "gate coefficient length differs from design width");
  if (!lambda_fixed.empty() && lambda_fixed.size() != k)
    throw Error(ErrorCode::kDimensionMismatch, "one gate lambda per context expected");

  GateStep out;
  out.gates = gates;
  Matrix scores = kernels::linear_scores(data.design, out.gates.v);
  out.loo_scores = scores;
  out.lambdas.assign(k, 0.0);
  out.curves.resize(k);
  out.min_weight_used = std::numeric_limits<double>::infinity();
  if (k == 1) {
    // A single gate is identically 1; nothing to learn.
    out.converged = true;
    return out;
  }

  const Matrix w = context_weights(ctx, resp);
  Matrix g = kernels::softmax_columns(scores);
  PathOptions opt = config.gate_path();

  for (out.cycles = 1; out.cycles <= config.max_newton_cycles; ++out.cycles) {
    double max_change = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const auto wr = working_response(c, scores, g, w, resp.phi, config.eta, config.xi);
      for (std::size_t i = 0; i < n; ++i) {
        out.min_weight_used = std::min(out.min_weight_used, wr.r[i]);
        if (!std::isfinite(wr.z[i]) || !std::isfinite(wr.r[i])) out.all_finite = false;
      }
      if (!lambda_fixed.empty()) opt.lambdas = {lambda_fixed[c]};
      const auto old = row_copy(out.gates.v, c);
      PenalizedFit fit;
      try {
        fit = fit_penalized_path(data.design, wr.z, wr.r, old, opt);
      } catch (const Error& e) {
        throw Error(e.code(), fmt::format("gate {}: {}", c, e.what()));
      }
      // The working problem is a proximal Newton step (Hessian scaled by 1/eta)
      // on -Q_g + (lambda/eta)|v_c|_1. Clamped samples drop out of the gradient,
      // so the step is not always an ascent step; halve it until it is.
      const double pen = fit.lambda / config.eta;
      const double before = penalized_gate_objective(out.gates.v, c, pen, data.design, w);
      const auto full = fit.coef;
      double t = 1.0;
      std::vector<double> step = full;
      for (int h = 0;; ++h) {
        for (std::size_t j = 0; j < old.size(); ++j) out.gates.v(c, j) = step[j];
        const double after = penalized_gate_objective(out.gates.v, c, pen, data.design, w);
        if (after >= before - 1e-13 * std::abs(before)) break;
        if (h == kMaxBacktracks) {
          for (std::size_t j = 0; j < old.size(); ++j) out.gates.v(c, j) = step[j] = old[j];
          break;
        }
        t *= 0.5;
        ++out.backtracks;
        for (std::size_t j = 0; j < old.size(); ++j) step[j] = old[j] + t * (full[j] - old[j]);
      }
      for (std::size_t j = 0; j < old.size(); ++j) max_change = std::max(max_change, std::abs(step[j] - old[j]));
      for (std::size_t i = 0; i < n; ++i) {
        const double s_full = dot(data.design.row(i), full);
        scores(c, i) = dot(data.design.row(i), step);
        // Held-out scores follow the accepted step.
        out.loo_scores(c, i) = fit.loo.loo_fit[i] + (scores(c, i) - s_full);
      }
      g = kernels::softmax_columns(scores);
      out.lambdas[c] = fit.lambda;
      out.curves[c] = std::move(fit.curve);
    }
    if (max_change < config.cgd_tol) {
      out.converged = true;
      break;
    }
  }
  out.cycles = std::min(out.cycles, config.max_newton_cycles);
  return out;
}

double gate_objective(const Matrix& v, const Matrix& design, const Matrix& weights) {
  const Matrix s = kernels::serial::linear_scores(design, v);
  double total = 0.0;
  std::vector<double> col(s.rows());
  for (std::size_t i = 0; i < s.cols(); ++i) {
    for (std::size_t c = 0; c < s.rows(); ++c) col[c] = s(c, i);
    const double lse = log_sum_exp(col);
    for (std::size_t c = 0; c < s.rows(); ++c)
      if (weights(c, i) != 0.0) total += weights(c, i) * (col[c] - lse);
  }
  return total;
}

Matrix gate_gradient(const Matrix& v, const Matrix& design, const Matrix& weights) {
  const Matrix g = kernels::serial::softmax_columns(kernels::serial::linear_scores(design, v));
  Matrix grad(v.rows(), v.cols());
  for (std::size_t i = 0; i < g.cols(); ++i) {
    double phi = 0.0;
    for (std::size_t c = 0; c < g.rows(); ++c) phi += weights(c, i);
    for (std::size_t c = 0; c < g.rows(); ++c) {
      const double a = weights(c, i) - phi * g(c, i);
      for (std::size_t j = 0; j < v.cols(); ++j) grad(c, j) += a * design(i, j);
    }
  }
  return grad;
}

bool StopRule::observe(std::size_t iteration, double value) {
  improved_ = false;
  if (std::isfinite(value) && (!seen_ || value < best_value_)) {
    seen_ = true;
    improved_ = true;
    best_value_ = value;
    best_iteration_ = iteration;
    since_best_ = 0;
    return false;
  }
  if (!seen_) return false;
  return ++since_best_ >= patience_;
}

FitResult fit(const Dataset& data, const ContextMatrix& ctx, const TrainConfig& config, const FitHooks& hooks) {
  config.validate();
  data.validate();
  const std::size_t n = data.n_samples(), k = ctx.n_contexts();
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "at least one context is required");
  if (ctx.n_samples() != n)
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("context matrix covers {} samples, data has {}", ctx.n_samples(), n));
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t c = 0; c < k && !any; ++c) any = ctx(c, i) > 0.0;
    if (!any) throw Error(ErrorCode::kDegenerateSample, fmt::format("sample {} has zero possibility in every context", i));
  }
  if (n <= data.n_features()) spdlog::warn("fit: {} samples for {} features", n, data.n_features());

  Dataset scaled;
  if (data.scaled()) {
    scaled = data;
  } else if (config.autoscale) {
    scaled = autoscale_apply(autoscale_fit(data), data);
  } else {
    Scaler identity;
    identity.feature_mean.assign(data.n_features(), 0.0);
    identity.feature_std.assign(data.n_features(), 1.0);
    scaled = autoscale_apply(identity, data);
  }
  const TrainingData td = TrainingData::from(scaled);
  const std::size_t p = td.design.cols();

  CmoeModel model;
  model.scaler = *scaled.scaler;
  model.feature_names = scaled.feature_names;
  model.context_labels = ctx.labels();
  if (model.context_labels.size() != k) {
    model.context_labels.clear();
    for (std::size_t c = 0; c < k; ++c) model.context_labels.push_back(fmt::format("context{}", c));
  }
  model.gates.v = Matrix(k, p, 0.0);
  model.experts.assign(k, ExpertModel{std::vector<double>(p, 0.0), 1.0});
  model.lambdas.assign(k, LambdaPair{});

  FitReport report;
  report.expert_curves.resize(k);
  report.gate_curves.resize(k);

  // Iteration 0: experts fit to gamma0 = pi (normalized), gates at zero.
  Responsibilities init;
  init.gamma = initial_gamma(ctx, td.design, config.seed);
  init.phi.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) init.phi[i] += ctx(c, i) * init.gamma(c, i);
  auto expert_steps = fit_experts(td, context_weights(ctx, init), model, config, nullptr);
  Matrix expert_loo(k, n);
  for (std::size_t c = 0; c < k; ++c) {
    model.experts[c] = expert_steps[c].expert;
    model.lambdas[c].expert = expert_steps[c].lambda;
    report.expert_curves[c] = expert_steps[c].curve;
    if (!expert_steps[c].converged) ++report.expert_nonconverged;
    for (std::size_t i = 0; i < n; ++i) expert_loo(c, i) = expert_steps[c].loo.loo_fit[i];
  }
  double cv = loocv_model(td.y, expert_loo, kernels::linear_scores(td.design, model.gates.v));
  if (hooks.cv_override) cv = hooks.cv_override(0, cv);
  double wll = weighted_log_likelihood(model, td, ctx);
  report.cv_trace.push_back(cv);
  report.wll_trace.push_back(wll);
  if (hooks.on_iteration) hooks.on_iteration({0, &model, nullptr, nullptr, cv, wll});

  StopRule stop(config.n_it);
  stop.observe(0, cv);
  CmoeModel best = model;
  FitReport best_curves = report;

  std::vector<double> frozen_expert, frozen_gate;
  for (std::size_t iter = 1; iter <= config.max_em_iters; ++iter) {
    const Responsibilities resp = e_step(model, td, ctx);
    const Matrix w = context_weights(ctx, resp);
    const bool freeze = config.freeze_lambdas && iter > 1;

    expert_steps = fit_experts(td, w, model, config, freeze ? &frozen_expert : nullptr);
    GateStep gstep = m_step_gates(model.gates, td, resp, ctx, config,
                                  freeze ? std::span<const double>(frozen_gate) : std::span<const double>());

    CmoeModel next = model;
    for (std::size_t c = 0; c < k; ++c) {
      next.experts[c] = expert_steps[c].expert;
      next.lambdas[c] = {expert_steps[c].lambda, gstep.lambdas[c]};
      report.expert_curves[c] = std::move(expert_steps[c].curve);
      if (k > 1) report.gate_curves[c] = std::move(gstep.curves[c]);
      if (!expert_steps[c].converged) ++report.expert_nonconverged;
      for (std::size_t i = 0; i < n; ++i) expert_loo(c, i) = expert_steps[c].loo.loo_fit[i];
    }
    next.gates = gstep.gates;
    if (!gstep.converged) ++report.gate_nonconverged;
    if (!gstep.all_finite) throw Error(ErrorCode::kSingularMatrix, "non-finite gate working response");
    if (iter == 1) {
      for (const auto& l : next.lambdas) {
        frozen_expert.push_back(l.expert);
        frozen_gate.push_back(l.gate);
      }
    }

    cv = loocv_model(td.y, expert_loo, gstep.loo_scores);
    if (hooks.cv_override) cv = hooks.cv_override(iter, cv);
    wll = weighted_log_likelihood(next, td, ctx);
    report.cv_trace.push_back(cv);
    report.wll_trace.push_back(wll);
    report.iterations_run = iter;
    if (hooks.on_iteration) hooks.on_iteration({iter, &next, &resp, &model, cv, wll});
    spdlog::debug("em iteration {}: cv {:.6g}, wll {:.6g}", iter, cv, wll);

    model = std::move(next);
    const bool done = stop.observe(iter, cv);
    if (stop.improved()) {
      best = model;
      best_curves.expert_curves = report.expert_curves;
      best_curves.gate_curves = report.gate_curves;
    }
    if (done) {
      report.stopped_by_rule = true;
      break;
    }
  }

  report.selected_iteration = stop.best_iteration();
  report.expert_curves = std::move(best_curves.expert_curves);
  report.gate_curves = std::move(best_curves.gate_curves);
  report.lambdas = best.lambdas;
  report.consistency = consistency_index(gate_matrix(best, td.design), ctx);
  report.responsibilities = e_step(best, td, ctx).gamma;
  report.fitted = predict_scaled(best, td.design);
  for (double& v : report.fitted) v = best.scaler.unscale_target(v);

  best.meta["selected_iteration"] = std::to_string(report.selected_iteration);
  best.meta["iterations_run"] = std::to_string(report.iterations_run);
  best.meta["cv"] = fmt::format("{:.17g}", report.cv_trace[report.selected_iteration]);
  best.meta["n_samples"] = std::to_string(n);
  best.meta["seed"] = std::to_string(config.seed);
  return {std::move(best), std::move(report)};
}

std::vector<double> predict(const CmoeModel& model, const Dataset& raw) {
  if (raw.scaled()) throw Error(ErrorCode::kStateError, "predict expects unscaled data");
  std::vector<double> out(raw.n_samples());
  for (std::size_t i = 0; i < raw.n_samples(); ++i) out[i] = predict(model, raw.x.row(i)).y;
  return out;
}

}  // namespace cmoe
