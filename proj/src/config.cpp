#include "cmoe/config.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cmoe/error.hpp"

namespace cmoe {

namespace {

using nlohmann::json;

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, fmt::format("field '{}': {}", key, e.what()));
  }
}

ContextDef parse_context(const json& j, std::size_t index) {
  ContextDef def;
  def.name = fmt::format("context{}", index);
  read(j, "name", def.name);
  std::string kind = "ignorance";
  read(j, "kind", kind);
  if (kind == "alpha_certain") {
    def.kind = ContextKind::kAlphaCertain;
    read(j, "alpha", def.alpha);
    std::vector<std::vector<std::size_t>> ranges;
    read(j, "ranges", ranges);
    for (const auto& r : ranges) {
      if (r.size() != 2 || r[0] >= r[1])
        throw Error(ErrorCode::kConfigError, fmt::format("context '{}': ranges are [begin, end) pairs", def.name));
      def.ranges.emplace_back(r[0], r[1]);
    }
    if (def.ranges.empty()) throw Error(ErrorCode::kConfigError, fmt::format("context '{}': no ranges", def.name));
  } else if (kind == "beta_trapezoid") {
    def.kind = ContextKind::kBetaTrapezoid;
    read(j, "beta", def.beta);
    read(j, "complement", def.complement);
    std::string coord = "index";
    read(j, "coordinate", coord);
    if (coord != "index" && coord != "time")
      throw Error(ErrorCode::kConfigError, fmt::format("context '{}': coordinate must be index or time", def.name));
    def.time_coordinate = coord == "time";
    std::vector<std::vector<double>> traps;
    read(j, "trapezoids", traps);
    for (const auto& t : traps) {
      if (t.size() != 4 || !(t[0] < t[1] && t[1] < t[2] && t[2] < t[3]))
        throw Error(ErrorCode::kConfigError, fmt::format("context '{}': trapezoids need a < b < c < d", def.name));
      def.trapezoids.push_back({t[0], t[1], t[2], t[3]});
    }
    if (def.trapezoids.empty())
      throw Error(ErrorCode::kConfigError, fmt::format("context '{}': no trapezoids", def.name));
  } else if (kind != "ignorance") {
    throw Error(ErrorCode::kConfigError, fmt::format("context '{}': unknown kind '{}'", def.name, kind));
  }
  return def;
}

void parse_train(const json& j, TrainConfig& t) {
  read(j, "expert_lambdas", t.expert_lambdas);
  read(j, "gate_lambdas", t.gate_lambdas);
  read(j, "lambda_grid_size", t.lambda_grid_size);
  read(j, "lambda_min_ratio", t.lambda_min_ratio);
  read(j, "freeze_lambdas", t.freeze_lambdas);
  read(j, "eta", t.eta);
  read(j, "xi", t.xi);
  read(j, "n_it", t.n_it);
  read(j, "max_em_iters", t.max_em_iters);
  read(j, "cgd_tol", t.cgd_tol);
  read(j, "max_cgd_cycles", t.max_cgd_cycles);
  read(j, "max_newton_cycles", t.max_newton_cycles);
  read(j, "gate_press_plus_form", t.gate_press_plus_form);
  read(j, "paper_literal_gate_press", t.gate_press_plus_form);  // accepted alias
  read(j, "autoscale", t.autoscale);
}

Dataset load_and_lag(const RunConfig& config, const std::string& path) {
  Dataset data = load_csv(config.resolve(path), config.schema);
  const bool identity = config.lags.per_variable.empty() && config.lags.default_delays == std::vector<std::size_t>{0};
  return identity ? data : lag_features(data, config.lags);
}

}  // namespace

std::string RunConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p.string();
  return (std::filesystem::path(base_dir) / p).string();
}

void RunConfig::validate() const {
  if (train_path.empty()) throw Error(ErrorCode::kConfigError, "data.train is required");
  if (schema.target.empty()) throw Error(ErrorCode::kConfigError, "data.target is required");
  if (n_contexts == 0) throw Error(ErrorCode::kConfigError, "n_contexts must be at least 1");
  if (contexts.size() != n_contexts)
    throw Error(ErrorCode::kConfigError,
                fmt::format("n_contexts is {} but {} contexts are defined", n_contexts, contexts.size()));
  for (const auto& c : contexts) {
    if (!(c.alpha >= 0.0 && c.alpha <= 1.0) || !(c.beta >= 0.0 && c.beta <= 1.0))
      throw Error(ErrorCode::kConfigError, fmt::format("context '{}': certainty outside [0, 1]", c.name));
  }
  for (double g : tune.grid)
    if (!(g >= 0.0 && g <= 1.0)) throw Error(ErrorCode::kConfigError, "tune.grid values must lie in [0, 1]");
  if (!(evaluate.test_fraction > 0.0 && evaluate.test_fraction < 1.0))
    throw Error(ErrorCode::kConfigError, "evaluate.test_fraction must lie in (0, 1)");
  if (evaluate.n_perm < 100) throw Error(ErrorCode::kConfigError, "evaluate.n_perm must be at least 100");
  lags.validate();
  train.validate();
}

RunConfig parse_run_config(const std::string& text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfigError, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kConfigError, "config must be a JSON object");

  RunConfig cfg;
  cfg.base_dir = base_dir;
  if (doc.contains("data")) {
    const json& d = doc["data"];
    read(d, "train", cfg.train_path);
    read(d, "test", cfg.test_path);
    read(d, "target", cfg.schema.target);
    read(d, "features", cfg.schema.features);
    read(d, "batch_column", cfg.schema.batch_column);
    read(d, "time_column", cfg.schema.time_column);
    std::string delim = ",";
    read(d, "delimiter", delim);
    if (delim.size() != 1) throw Error(ErrorCode::kConfigError, "data.delimiter must be one character");
    cfg.schema.delimiter = delim[0];
  }
  if (doc.contains("lags")) {
    read(doc["lags"], "default", cfg.lags.default_delays);
    read(doc["lags"], "per_variable", cfg.lags.per_variable);
  }
  read(doc, "n_contexts", cfg.n_contexts);
  if (doc.contains("contexts")) {
    if (!doc["contexts"].is_array()) throw Error(ErrorCode::kConfigError, "contexts must be an array");
    for (std::size_t c = 0; c < doc["contexts"].size(); ++c) cfg.contexts.push_back(parse_context(doc["contexts"][c], c));
  }
  if (cfg.n_contexts == 0) cfg.n_contexts = cfg.contexts.size();
  if (doc.contains("train")) parse_train(doc["train"], cfg.train);
  if (doc.contains("tune")) {
    read(doc["tune"], "grid", cfg.tune.grid);
    read(doc["tune"], "epsilon", cfg.tune.epsilon);
  }
  if (doc.contains("evaluate")) {
    read(doc["evaluate"], "test_fraction", cfg.evaluate.test_fraction);
    read(doc["evaluate"], "n_perm", cfg.evaluate.n_perm);
  }
  read(doc, "output_dir", cfg.output_dir);
  read(doc, "seed", cfg.seed);
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot open config {}", path));
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path().string();
  return parse_run_config(ss.str(), dir.empty() ? "." : dir);
}

Dataset load_training_data(const RunConfig& config) { return load_and_lag(config, config.train_path); }

Dataset load_test_data(const RunConfig& config) {
  if (config.test_path.empty()) throw Error(ErrorCode::kConfigError, "data.test is not set");
  return load_and_lag(config, config.test_path);
}

ContextMatrix build_contexts(const RunConfig& config, const Dataset& data, std::optional<double> certainty) {
  const std::size_t n = data.n_samples(), k = config.contexts.size();
  Matrix pi(k, n, 1.0);
  std::vector<std::string> labels;
  for (std::size_t c = 0; c < k; ++c) {
    const ContextDef& def = config.contexts[c];
    labels.push_back(def.name);
    if (def.kind == ContextKind::kAlphaCertain) {
      const double alpha = certainty.value_or(def.alpha);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = data.sample_index.empty() ? i : data.sample_index[i];
        bool member = false;
        for (const auto& [b, e] : def.ranges) member = member || (s >= b && s < e);
        pi(c, i) = member ? 1.0 : 1.0 - alpha;
      }
    } else if (def.kind == ContextKind::kBetaTrapezoid) {
      const double beta = certainty.value_or(def.beta);
      if (def.time_coordinate && data.time.empty())
        throw Error(ErrorCode::kConfigError, fmt::format("context '{}' uses time but no time column", def.name));
      for (std::size_t i = 0; i < n; ++i) {
        const double pos = def.time_coordinate ? data.time[i]
                                               : static_cast<double>(data.sample_index.empty() ? i : data.sample_index[i]);
        double m = 0.0;
        for (const auto& t : def.trapezoids) m = std::max(m, trapezoid_membership({t[0], t[1], t[2], t[3], 0.0}, pos));
        if (def.complement) m = 1.0 - m;
        pi(c, i) = std::max(m, beta);
      }
    }
  }
  return ContextMatrix(std::move(pi), std::move(labels));
}

}  // namespace cmoe
