#pragma once

// Expectation-maximization for the contextual mixture of experts. Every
// sample/context pair is weighted by its possibility pi_ci: responsibilities
// are proportional to pi * gate * Gaussian density, experts solve a
// pi*gamma-weighted LASSO, and gates take damped Newton steps whose working
// least-squares problems are solved with the same LASSO machinery.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cmoe/dataset.hpp"
#include "cmoe/lasso.hpp"
#include "cmoe/model.hpp"
#include "cmoe/possibility.hpp"
#include "cmoe/selection.hpp"

namespace cmoe {

struct TrainConfig {
  // Empty grids select lambda automatically (30 log-spaced values from
  // lambda_max to lambda_min_ratio * lambda_max, plus 0).
  std::vector<double> expert_lambdas;
  std::vector<double> gate_lambdas;
  std::size_t lambda_grid_size = 30;
  double lambda_min_ratio = 1e-3;
  bool freeze_lambdas = false;  // keep the lambdas chosen in the first EM iteration

  double eta = 0.1;   // damped Newton step for the gates
  double xi = 1e-3;   // gate saturation clamp
  std::size_t n_it = 6;
  std::size_t max_em_iters = 100;
  double cgd_tol = 1e-6;
  std::size_t max_cgd_cycles = 10000;
  std::size_t max_newton_cycles = 10;
  bool gate_press_plus_form = false;
  bool autoscale = true;
  std::uint64_t seed = 0;

  void validate() const;
  PathOptions expert_path() const;
  PathOptions gate_path() const;
};

struct Responsibilities {
  Matrix gamma;                 // C x N
  std::vector<double> phi;      // sum_c pi_ci gamma_ci
  std::vector<double> log_mix;  // log sum_c pi_ci g_ci p_ci
};

// Training view of a scaled dataset: augmented design and scaled target.
struct TrainingData {
  Matrix design;
  std::vector<double> y;

  static TrainingData from(const Dataset& scaled);
  std::size_t n_samples() const noexcept { return y.size(); }
};

Responsibilities e_step(const CmoeModel& model, const TrainingData& data, const ContextMatrix& ctx);

// Sum_i log sum_c pi_ci g_ci p_ci. With complete ignorance this is the plain
// mixture log-likelihood.
double weighted_log_likelihood(const CmoeModel& model, const TrainingData& data, const ContextMatrix& ctx);

// w_ci = pi_ci * gamma_ci.
Matrix context_weights(const ContextMatrix& ctx, const Responsibilities& resp);

struct ExpertStep {
  ExpertModel expert;
  double lambda = 0.0;
  CvCurve curve;
  LooResult loo;
  bool converged = true;
};

// Fixed-lambda expert update. sigma2 is the weighted mean squared residual,
// floored at 1e-8.
ExpertStep m_step_expert(const TrainingData& data, std::span<const double> weights, double lambda,
                         std::span<const double> theta_init, const CgdOptions& options = {});

// Expert update with lambda chosen by the leave-one-out estimate over a grid.
ExpertStep m_step_expert(const TrainingData& data, std::span<const double> weights, std::span<const double> theta_init,
                         const PathOptions& options);

struct WorkingResponse {
  std::vector<double> r;
  std::vector<double> z;
  std::size_t clamped = 0;
};

// r_ci and z_ci for gate c at the current gate probabilities. Samples whose
// gate lies within xi of 0 or 1, or whose Newton weight falls below xi, use
// z = x'v_c and r = xi.
WorkingResponse working_response(std::size_t c, const Matrix& scores, const Matrix& gates,
                                 const Matrix& weights, std::span<const double> phi, double eta, double xi);

struct GateStep {
  GateModel gates;
  std::vector<double> lambdas;
  std::vector<CvCurve> curves;
  Matrix loo_scores;              // C x N held-out gate scores
  std::size_t cycles = 0;
  bool converged = false;
  double min_weight_used = 0.0;   // smallest r_ci entering any solve
  bool all_finite = true;
  std::size_t backtracks = 0;     // step halvings taken to keep the gate objective from falling
};

// lambda_fixed: one value per context, or empty to select from the grid.
GateStep m_step_gates(const GateModel& gates, const TrainingData& data, const Responsibilities& resp,
                      const ContextMatrix& ctx, const TrainConfig& config,
                      std::span<const double> lambda_fixed = {});

// Gate part of the Q-function and its gradient with respect to each v_c
// (C x (d+1)); weights are pi_ci gamma_ci.
double gate_objective(const Matrix& v, const Matrix& design, const Matrix& weights);
Matrix gate_gradient(const Matrix& v, const Matrix& design, const Matrix& weights);

// Running-minimum stop rule: stop once n_it consecutive iterations have failed
// to improve on the best value seen so far.
class StopRule {
 public:
  explicit StopRule(std::size_t patience) : patience_(patience) {}

  // Returns true when training should stop.
  bool observe(std::size_t iteration, double value);
  bool improved() const noexcept { return improved_; }
  std::size_t best_iteration() const noexcept { return best_iteration_; }
  double best_value() const noexcept { return best_value_; }

 private:
  std::size_t patience_;
  std::size_t best_iteration_ = 0;
  double best_value_ = 0.0;
  std::size_t since_best_ = 0;
  bool seen_ = false;
  bool improved_ = false;
};

struct FitReport {
  std::vector<double> cv_trace;   // index 0 is the initial model
  std::vector<double> wll_trace;
  std::size_t selected_iteration = 0;
  std::size_t iterations_run = 0;
  bool stopped_by_rule = false;
  ConsistencyIndex consistency;
  std::vector<LambdaPair> lambdas;
  Matrix responsibilities;        // E-step at the selected model
  std::vector<double> fitted;     // training predictions, original units
  std::vector<CvCurve> expert_curves;
  std::vector<CvCurve> gate_curves;
  std::size_t expert_nonconverged = 0;
  std::size_t gate_nonconverged = 0;
};

struct IterationSnapshot {
  std::size_t iteration = 0;
  const CmoeModel* model = nullptr;             // model after this iteration's M-step
  const Responsibilities* used = nullptr;       // E-step that fed the M-step (null at 0)
  const CmoeModel* previous = nullptr;          // model the E-step was computed from
  double cv = 0.0;
  double wll = 0.0;
};

struct FitHooks {
  // Replaces the computed CV value (used to drive the stop rule in tests).
  std::function<double(std::size_t iteration, double computed)> cv_override;
  std::function<void(const IterationSnapshot&)> on_iteration;
};

struct FitResult {
  CmoeModel model;
  FitReport report;
};

// Raw data is auto-scaled first (unless config.autoscale is false or the data
// is already scaled).
FitResult fit(const Dataset& data, const ContextMatrix& ctx, const TrainConfig& config, const FitHooks& hooks = {});

// Predictions in original units for an unscaled dataset.
std::vector<double> predict(const CmoeModel& model, const Dataset& raw);

}  // namespace cmoe
