#include "cmoe/cli.hpp"

#include <fmt/format.h>
#include <spdlog/cfg/helpers.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include "cmoe/config.hpp"
#include "cmoe/em.hpp"
#include "cmoe/kernels.hpp"
#include "cmoe/lasso.hpp"
#include "cmoe/metrics.hpp"
#include "cmoe/model.hpp"
#include "cmoe/synth.hpp"

namespace cmoe {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool plus_form = false;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSingularMatrix:
    case ErrorCode::kAllZeroWeights:
    case ErrorCode::kZeroVariance:
      return kExitNumerical;
    case ErrorCode::kNoFeasiblePoint:
      return kExitInfeasible;
    default:
      return kExitInput;
  }
}

RunConfig load_config(const CommonOptions& opt) {
  RunConfig cfg = load_run_config(opt.config_path);
  if (opt.seed) cfg.seed = cfg.train.seed = *opt.seed;
  if (opt.plus_form) cfg.train.gate_press_plus_form = true;
  if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
  else cfg.output_dir = cfg.resolve(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, fmt::format("cannot create {}: {}", cfg.output_dir, ec.message()));
  return cfg;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", path.string()));
  return os;
}

std::string lambda_summary(const CmoeModel& m) {
  std::string s;
  for (std::size_t c = 0; c < m.n_contexts(); ++c)
    s += fmt::format("{}{}(expert {:.4g}, gate {:.4g})", c ? ", " : "", m.context_labels[c], m.lambdas[c].expert,
                     m.lambdas[c].gate);
  return s;
}

int cmd_fit(const CommonOptions& opt) {
  const RunConfig cfg = load_config(opt);
  const Dataset data = load_training_data(cfg);
  const ContextMatrix ctx = build_contexts(cfg, data);
  auto [model, report] = fit(data, ctx, cfg.train);
  const fs::path out(cfg.output_dir);
  save_model(model, (out / "model.json").string());

  auto trace = open_out(out / "fit_trace.csv");
  trace << "iteration,cv,wll,selected\n";
  for (std::size_t t = 0; t < report.cv_trace.size(); ++t)
    trace << fmt::format("{},{:.17g},{:.17g},{}\n", t, report.cv_trace[t], report.wll_trace[t],
                         t == report.selected_iteration ? 1 : 0);
  write_csv((out / "fitted.csv").string(), {data.target_name, "y_hat"}, {data.y, report.fitted});
  for (std::size_t c = 0; c < model.n_contexts(); ++c) {
    auto e = open_out(out / fmt::format("expert_curve_{}.csv", model.context_labels[c]));
    report.expert_curves[c].write_csv(e);
    if (!report.gate_curves[c].lambdas.empty()) {
      auto g = open_out(out / fmt::format("gate_curve_{}.csv", model.context_labels[c]));
      report.gate_curves[c].write_csv(g);
    }
  }

  const double cv = report.cv_trace[report.selected_iteration];
  const std::string line = fmt::format("cv {:.6g}  C_I {:.4f}  iteration {}/{}  lambdas: {}", cv,
                                       report.consistency.overall, report.selected_iteration, report.iterations_run,
                                       lambda_summary(model));
  auto summary = open_out(out / "summary.txt");
  summary << line << '\n';
  summary << "fitted R2 " << fmt::format("{:.6f}", compute_metrics(data.y, report.fitted).r2) << '\n';
  for (std::size_t c = 0; c < model.n_contexts(); ++c)
    summary << fmt::format("C_I[{}] {:.4f}\n", model.context_labels[c], report.consistency.per_context[c]);
  std::cout << line << '\n';
  return kExitOk;
}

int cmd_predict(const CommonOptions& opt, const std::string& model_path, const std::string& data_path,
                const std::string& out_path) {
  RunConfig cfg = load_config(opt);
  if (!data_path.empty()) cfg.train_path = fs::absolute(data_path).string();
  const CmoeModel model = load_model(model_path);
  const Dataset data = load_training_data(cfg);
  if (data.feature_names != model.feature_names)
    throw Error(ErrorCode::kDimensionMismatch, "data features differ from the features the model was fitted on");

  const std::size_t k = model.n_contexts();
  std::vector<std::string> header{"y_hat"};
  for (const auto& l : model.context_labels) header.push_back("h_" + l);
  for (const auto& l : model.context_labels) header.push_back("g_" + l);
  std::vector<std::vector<double>> cols(1 + 2 * k, std::vector<double>(data.n_samples()));
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    const auto p = predict(model, data.x.row(i));
    cols[0][i] = p.y;
    for (std::size_t c = 0; c < k; ++c) {
      cols[1 + c][i] = p.contributions[c];
      cols[1 + k + c][i] = p.gates[c];
    }
  }
  const std::string path = out_path.empty() ? (fs::path(cfg.output_dir) / "predictions.csv").string() : out_path;
  write_csv(path, header, cols);
  std::cout << fmt::format("wrote {} predictions to {}\n", data.n_samples(), path);
  return kExitOk;
}

std::vector<double> residuals(const std::vector<double>& y, const std::vector<double>& yhat) {
  std::vector<double> r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - yhat[i];
  return r;
}

int cmd_evaluate(const CommonOptions& opt) {
  const RunConfig cfg = load_config(opt);
  const Dataset data = load_training_data(cfg);
  const fs::path out(cfg.output_dir);
  const PathOptions lasso_opt = cfg.train.expert_path();

  auto fit_cmoe = [&](const Dataset& train, const Dataset& test) {
    return predict(fit(train, build_contexts(cfg, train), cfg.train).model, test);
  };
  auto fit_base = [&](const Dataset& train, const Dataset& test) { return fit_lasso(train, lasso_opt).predict(test); };

  std::vector<double> y_true, pred_cmoe, pred_lasso;
  MetricSet m_cmoe, m_lasso;
  if (data.has_batches() && cfg.test_path.empty()) {
    const auto e_cmoe = leave_one_batch_out(data, fit_cmoe);
    const auto e_lasso = leave_one_batch_out(data, fit_base);
    if (e_cmoe.failed_folds == e_cmoe.folds.size() || e_lasso.failed_folds == e_lasso.folds.size())
      throw Error(ErrorCode::kSingularMatrix, "every leave-one-batch-out fold failed");
    auto folds = open_out(out / "folds.csv");
    folds << "batch,n_test,model,r2,rmse,mae,failed\n";
    for (const auto* e : {&e_cmoe, &e_lasso}) {
      const char* name = e == &e_cmoe ? "cmoe" : "lasso";
      for (const auto& f : e->folds)
        folds << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{}\n", f.batch, f.n_test, name, f.metrics.r2,
                             f.metrics.rmse, f.metrics.mae, f.failed ? 1 : 0);
    }
    // Pair predictions fold by fold; folds failing for either model are left out.
    for (std::size_t f = 0; f < e_cmoe.folds.size(); ++f) {
      if (e_cmoe.folds[f].failed || e_lasso.folds[f].failed) continue;
      const auto& a = e_cmoe.folds[f];
      y_true.insert(y_true.end(), a.y_true.begin(), a.y_true.end());
      pred_cmoe.insert(pred_cmoe.end(), a.y_pred.begin(), a.y_pred.end());
      pred_lasso.insert(pred_lasso.end(), e_lasso.folds[f].y_pred.begin(), e_lasso.folds[f].y_pred.end());
    }
    m_cmoe = e_cmoe.averaged;
    m_lasso = e_lasso.averaged;
  } else {
    Dataset train, test;
    if (!cfg.test_path.empty()) {
      train = data;
      test = load_test_data(cfg);
    } else {
      std::vector<std::size_t> rows(data.n_samples());
      std::iota(rows.begin(), rows.end(), 0);
      std::mt19937_64 rng(cfg.seed);
      std::shuffle(rows.begin(), rows.end(), rng);
      const auto n_test = static_cast<std::size_t>(std::llround(cfg.evaluate.test_fraction * rows.size()));
      std::vector<std::size_t> te(rows.begin(), rows.begin() + n_test), tr(rows.begin() + n_test, rows.end());
      std::sort(te.begin(), te.end());
      std::sort(tr.begin(), tr.end());
      train = data.subset(tr);
      test = data.subset(te);
    }
    y_true = test.y;
    pred_cmoe = fit_cmoe(train, test);
    pred_lasso = fit_base(train, test);
    m_cmoe = compute_metrics(y_true, pred_cmoe);
    m_lasso = compute_metrics(y_true, pred_lasso);
  }

  const auto r_cmoe = residuals(y_true, pred_cmoe);
  const auto r_lasso = residuals(y_true, pred_lasso);
  EvalReport report;
  report.reference = "cmoe";
  report.models.push_back({"cmoe", m_cmoe, randomization_test(r_cmoe, r_cmoe, cfg.evaluate.n_perm, cfg.seed)});
  report.models.push_back({"lasso", m_lasso, randomization_test(r_cmoe, r_lasso, cfg.evaluate.n_perm, cfg.seed)});
  auto csv = open_out(out / "metrics.csv");
  report.write_csv(csv);
  auto table = open_out(out / "metrics.txt");
  report.write_table(table);
  report.write_table(std::cout);
  write_csv((out / "test_predictions.csv").string(), {"y", "cmoe", "lasso"}, {y_true, pred_cmoe, pred_lasso});
  return kExitOk;
}

int cmd_tune(const CommonOptions& opt) {
  const RunConfig cfg = load_config(opt);
  if (cfg.tune.grid.empty()) throw Error(ErrorCode::kConfigError, "tune.grid is empty");
  const Dataset data = load_training_data(cfg);
  const fs::path out(cfg.output_dir);

  auto fit_fn = [&](double certainty) {
    const ContextMatrix ctx = build_contexts(cfg, data, certainty);
    const auto r = fit(data, ctx, cfg.train).report;
    return TunePoint{certainty, r.cv_trace[r.selected_iteration], r.consistency.overall, false};
  };
  auto write_table = [&](const std::vector<TunePoint>& table, std::optional<std::size_t> selected) {
    auto os = open_out(out / "tune.csv");
    os << "certainty,cv,consistency,failed,selected\n";
    for (std::size_t k = 0; k < table.size(); ++k)
      os << fmt::format("{:.17g},{:.17g},{:.17g},{},{}\n", table[k].certainty, table[k].cv_error,
                        table[k].consistency, table[k].failed ? 1 : 0, selected == k ? 1 : 0);
  };
  try {
    const auto res = tune_certainty(cfg.tune.grid, fit_fn, cfg.tune.epsilon);
    write_table(res.table, res.selected);
    const auto& p = res.table[res.selected];
    std::cout << fmt::format("selected certainty {:.4g}  cv {:.6g}  C_I {:.4f}\n", res.certainty, p.cv_error,
                             p.consistency);
  } catch (const NoFeasiblePoint& e) {
    write_table(e.table(), std::nullopt);
    throw;
  }
  return kExitOk;
}

struct SynthOptions {
  std::string out_dir = "synth";
  std::uint64_t seed = 0;
  std::size_t contexts = 2, features = 10, samples = 1000, support = 3, batches = 0;
  double noise = 0.1, shift = 2.5, overlap = 0.0, label_shift = 0.0, blur = 0.0;
};

int cmd_synth(const SynthOptions& o) {
  SynthSpec spec = default_synth_spec(o.contexts, o.features, o.samples, o.support, o.noise, o.seed);
  spec.mode_shift = o.shift;
  spec.overlap = o.overlap;
  spec.label_shift = o.label_shift;
  spec.blur_width = o.blur;
  spec.n_batches = o.batches;
  const SynthData synth = generate(spec);
  write_synth_files(synth, spec, o.out_dir);
  std::cout << fmt::format("wrote {} samples to {}\n", o.samples, o.out_dir);
  return kExitOk;
}

void setup_logging() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("CMOE_LOG"); env && *env) spdlog::cfg::helpers::load_levels(env);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  setup_logging();
  CLI::App app{"Contextual mixture of experts"};
  app.require_subcommand(1);

  CommonOptions common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", common.out_dir, "Output directory (overrides the config)");
    sub->add_option("--seed", common.seed, "Random seed (overrides the config)");
    sub->add_option("--threads", common.threads, "Maximum worker threads")->check(CLI::NonNegativeNumber);
    sub->add_flag("--gate-press-plus-form,--paper-literal-gate-press", common.plus_form,
                  "Held-out gate scores use (zhat + M_ii z) / (1 - M_ii)");
  };

  auto* fit_cmd = app.add_subcommand("fit", "Train a model and write it with its training report");
  add_common(fit_cmd);

  std::string model_path, data_path, pred_out;
  auto* predict_cmd = app.add_subcommand("predict", "Predict with per-context contributions and gates");
  add_common(predict_cmd);
  predict_cmd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--data", data_path, "CSV to predict (defaults to the training file)");
  predict_cmd->add_option("--predictions", pred_out, "Output CSV path");

  auto* eval_cmd = app.add_subcommand("evaluate", "Compare against a plain LASSO baseline");
  add_common(eval_cmd);

  auto* tune_cmd = app.add_subcommand("tune-certainty", "Scan the certainty grid");
  add_common(tune_cmd);

  SynthOptions so;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic multimode data set and config");
  synth_cmd->add_option("--out", so.out_dir, "Output directory");
  synth_cmd->add_option("--seed", so.seed, "Random seed");
  synth_cmd->add_option("--threads", common.threads, "Ignored; accepted for uniformity");
  synth_cmd->add_option("--contexts", so.contexts)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--features", so.features)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--samples", so.samples)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--support", so.support);
  synth_cmd->add_option("--noise", so.noise)->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--shift", so.shift, "Regime offset of feature x1");
  synth_cmd->add_option("--overlap", so.overlap, "Half-width of the random mixing zone at boundaries");
  synth_cmd->add_option("--label-shift", so.label_shift, "Offset of the analyst boundaries");
  synth_cmd->add_option("--blur", so.blur, "Ramp width of the softened analyst labels");
  synth_cmd->add_option("--batches", so.batches, "Number of equal consecutive batches");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  kernels::set_max_threads(common.threads);
  try {
    if (*fit_cmd) return cmd_fit(common);
    if (*predict_cmd) return cmd_predict(common, model_path, data_path, pred_out);
    if (*eval_cmd) return cmd_evaluate(common);
    if (*tune_cmd) return cmd_tune(common);
    if (*synth_cmd) return cmd_synth(so);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitInput;
}

}  // namespace cmoe
