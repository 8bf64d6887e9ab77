#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cmoe/dataset.hpp"
#include "cmoe/linalg.hpp"

namespace cmoe {

// Indices j >= 1 with theta_j != 0. Index 0 is the (never penalized)
// intercept and is not listed.
std::vector<std::size_t> active_set(std::span<const double> coef);

struct ExpertModel {
  std::vector<double> theta;  // d + 1, intercept first
  double sigma2 = 1.0;

  std::vector<std::size_t> active() const { return active_set(theta); }
};

struct GateModel {
  Matrix v;  // C x (d + 1), intercept first

  std::size_t n_contexts() const noexcept { return v.rows(); }
  std::vector<std::size_t> active(std::size_t c) const { return active_set(v.row(c)); }
};

struct LambdaPair {
  double expert = 0.0;
  double gate = 0.0;
};

struct CmoeModel {
  std::vector<ExpertModel> experts;
  GateModel gates;
  std::vector<std::string> context_labels;
  std::vector<std::string> feature_names;
  Scaler scaler;
  std::vector<LambdaPair> lambdas;
  std::map<std::string, std::string> meta;

  std::size_t n_contexts() const noexcept { return experts.size(); }
  std::size_t n_features() const noexcept { return scaler.n_features(); }

  // Throws when the expert / gate / scaler dimensions disagree.
  void validate() const;
};

// Softmax over x'v_c for one scaled feature vector (no intercept entry).
std::vector<double> gate_probabilities(const CmoeModel& model, std::span<const double> x);

// x'theta_c including the intercept, for one scaled feature vector.
double expert_mean(const CmoeModel& model, std::size_t c, std::span<const double> x);

struct Prediction {
  double y = 0.0;                     // original target units
  double y_scaled = 0.0;              // sum of contributions
  std::vector<double> contributions;  // h_c = g_c * yhat_c (scaled units)
  std::vector<double> gates;
};

// x_raw is an unscaled feature vector.
Prediction predict(const CmoeModel& model, std::span<const double> x_raw);

// Batch versions over an augmented, scaled design matrix (N x (d+1)).
Matrix gate_matrix(const CmoeModel& model, const Matrix& design);      // C x N
Matrix expert_matrix(const CmoeModel& model, const Matrix& design);    // C x N
std::vector<double> predict_scaled(const CmoeModel& model, const Matrix& design);

inline constexpr int kModelFormatVersion = 1;

void save_model(const CmoeModel& model, const std::string& path);
CmoeModel load_model(const std::string& path);
std::string model_to_string(const CmoeModel& model);
CmoeModel model_from_string(const std::string& text);

}  // namespace cmoe
