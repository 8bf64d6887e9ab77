#include "cmoe/model.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cmoe/error.hpp"
#include "cmoe/kernels.hpp"

namespace cmoe {

using nlohmann::json;

std::vector<std::size_t> active_set(std::span<const double> coef) {
  std::vector<std::size_t> out;
  for (std::size_t j = 1; j < coef.size(); ++j)
    if (coef[j] != 0.0) out.push_back(j);
  return out;
}

void CmoeModel::validate() const {
  const std::size_t c = experts.size();
  if (c == 0) throw Error(ErrorCode::kInvalidArgument, "model has no experts");
  const std::size_t p = scaler.n_features() + 1;
  if (scaler.feature_std.size() != scaler.feature_mean.size())
    throw Error(ErrorCode::kShapeMismatch, "scaler mean/std lengths differ");
  if (gates.v.rows() != c) throw Error(ErrorCode::kShapeMismatch, "gate count differs from expert count");
  if (gates.v.cols() != p) throw Error(ErrorCode::kShapeMismatch, "gate length differs from scaler dimension");
  if (context_labels.size() != c) throw Error(ErrorCode::kShapeMismatch, "context label count differs from experts");
  if (!lambdas.empty() && lambdas.size() != c) throw Error(ErrorCode::kShapeMismatch, "lambda count differs from experts");
  for (const auto& e : experts) {
    if (e.theta.size() != p) throw Error(ErrorCode::kShapeMismatch, "expert length differs from scaler dimension");
    if (!(e.sigma2 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "expert noise variance must be positive");
  }
}

namespace {

void check_dim(const CmoeModel& model, std::size_t got) {
  if (got != model.n_features())
    throw Error(ErrorCode::kDimensionMismatch, fmt::format("model expects {} features, got {}", model.n_features(), got));
}

double score(std::span<const double> coef, std::span<const double> x) {
  double s = coef[0];
  for (std::size_t j = 0; j < x.size(); ++j) s += coef[j + 1] * x[j];
  return s;
}

}  // namespace

std::vector<double> gate_probabilities(const CmoeModel& model, std::span<const double> x) {
  check_dim(model, x.size());
  const std::size_t c = model.n_contexts();
  Matrix s(c, 1);
  for (std::size_t k = 0; k < c; ++k) s(k, 0) = score(model.gates.v.row(k), x);
  return kernels::serial::softmax_columns(s).column(0);
}

double expert_mean(const CmoeModel& model, std::size_t c, std::span<const double> x) {
  check_dim(model, x.size());
  if (c >= model.n_contexts()) throw Error(ErrorCode::kIndexOutOfRange, "expert index out of range");
  return score(model.experts[c].theta, x);
}

Prediction predict(const CmoeModel& model, std::span<const double> x_raw) {
  check_dim(model, x_raw.size());
  const auto x = model.scaler.scale_features(x_raw);
  Prediction p;
  p.gates = gate_probabilities(model, x);
  p.contributions.resize(model.n_contexts());
  for (std::size_t c = 0; c < model.n_contexts(); ++c) {
    p.contributions[c] = p.gates[c] * expert_mean(model, c, x);
    p.y_scaled += p.contributions[c];
  }
  p.y = model.scaler.unscale_target(p.y_scaled);
  return p;
}

Matrix gate_matrix(const CmoeModel& model, const Matrix& design) {
  return kernels::softmax_columns(kernels::linear_scores(design, model.gates.v));
}

Matrix expert_matrix(const CmoeModel& model, const Matrix& design) {
  Matrix theta(model.n_contexts(), design.cols());
  for (std::size_t c = 0; c < model.n_contexts(); ++c) {
    if (model.experts[c].theta.size() != design.cols())
      throw Error(ErrorCode::kDimensionMismatch, "design width differs from expert length");
    for (std::size_t j = 0; j < design.cols(); ++j) theta(c, j) = model.experts[c].theta[j];
  }
  return kernels::linear_scores(design, theta);
}

std::vector<double> predict_scaled(const CmoeModel& model, const Matrix& design) {
  const Matrix g = gate_matrix(model, design);
  const Matrix m = expert_matrix(model, design);
  std::vector<double> y(design.rows(), 0.0);
  for (std::size_t i = 0; i < design.rows(); ++i)
    for (std::size_t c = 0; c < model.n_contexts(); ++c) y[i] += g(c, i) * m(c, i);
  return y;
}

std::string model_to_string(const CmoeModel& model) {
  model.validate();
  json doc;
  doc["format"] = "cmoe-model";
  doc["version"] = kModelFormatVersion;
  doc["context_labels"] = model.context_labels;
  doc["feature_names"] = model.feature_names;
  doc["scaler"] = {{"feature_mean", model.scaler.feature_mean},
                   {"feature_std", model.scaler.feature_std},
                   {"target_mean", model.scaler.target_mean},
                   {"target_std", model.scaler.target_std}};
  doc["experts"] = json::array();
  for (const auto& e : model.experts) doc["experts"].push_back({{"theta", e.theta}, {"sigma2", e.sigma2}});
  doc["gates"] = json::array();
  for (std::size_t c = 0; c < model.gates.n_contexts(); ++c) {
    auto r = model.gates.v.row(c);
    doc["gates"].push_back({{"v", std::vector<double>(r.begin(), r.end())}});
  }
  doc["lambdas"] = json::array();
  for (const auto& l : model.lambdas) doc["lambdas"].push_back({{"expert", l.expert}, {"gate", l.gate}});
  doc["meta"] = model.meta;
  // nlohmann writes the shortest decimal form that round-trips exactly.
  return doc.dump(2);
}

CmoeModel model_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("model document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("version") || !doc["version"].is_number_integer())
    throw Error(ErrorCode::kFormatVersionMismatch, "model document has no version field");
  if (doc["version"].get<int>() != kModelFormatVersion)
    throw Error(ErrorCode::kFormatVersionMismatch,
                fmt::format("model version {} is not supported (expected {})", doc["version"].dump(), kModelFormatVersion));
  try {
    CmoeModel m;
    m.context_labels = doc.at("context_labels").get<std::vector<std::string>>();
    m.feature_names = doc.value("feature_names", std::vector<std::string>{});
    const auto& s = doc.at("scaler");
    m.scaler.feature_mean = s.at("feature_mean").get<std::vector<double>>();
    m.scaler.feature_std = s.at("feature_std").get<std::vector<double>>();
    m.scaler.target_mean = s.at("target_mean").get<double>();
    m.scaler.target_std = s.at("target_std").get<double>();
    for (const auto& e : doc.at("experts"))
      m.experts.push_back({e.at("theta").get<std::vector<double>>(), e.at("sigma2").get<double>()});
    const auto& gates = doc.at("gates");
    const std::size_t p = m.scaler.n_features() + 1;
    m.gates.v = Matrix(gates.size(), p);
    for (std::size_t c = 0; c < gates.size(); ++c) {
      auto v = gates[c].at("v").get<std::vector<double>>();
      if (v.size() != p) throw Error(ErrorCode::kShapeMismatch, "gate vector length differs from scaler dimension");
      for (std::size_t j = 0; j < p; ++j) m.gates.v(c, j) = v[j];
    }
    for (const auto& l : doc.at("lambdas")) m.lambdas.push_back({l.at("expert").get<double>(), l.at("gate").get<double>()});
    m.meta = doc.value("meta", std::map<std::string, std::string>{});
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("model document: ") + e.what());
  }
}

void save_model(const CmoeModel& model, const std::string& path) {
  const std::string text = model_to_string(model);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << text << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path);
}

CmoeModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_string(ss.str());
}

}  // namespace cmoe
