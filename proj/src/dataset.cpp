#include "cmoe/dataset.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>

#include "cmoe/error.hpp"

namespace cmoe {

std::vector<double> Scaler::scale_features(std::span<const double> x) const {
  if (x.size() != feature_mean.size())
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("expected {} features, got {}", feature_mean.size(), x.size()));
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - feature_mean[j]) / feature_std[j];
  return out;
}

void Dataset::validate() const {
  const std::size_t n = y.size();
  if (x.rows() != n) throw Error(ErrorCode::kShapeMismatch, "feature rows differ from target length");
  if (feature_names.size() != x.cols()) throw Error(ErrorCode::kShapeMismatch, "feature names differ from columns");
  if (!batch.empty() && batch.size() != n) throw Error(ErrorCode::kShapeMismatch, "batch ids differ from rows");
  if (!time.empty() && time.size() != n) throw Error(ErrorCode::kShapeMismatch, "timestamps differ from rows");
  if (sample_index.size() != n) throw Error(ErrorCode::kShapeMismatch, "sample index differs from rows");
  if (!x.all_finite()) throw Error(ErrorCode::kInvalidArgument, "feature matrix contains NaN or Inf");
  for (double v : y)
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "target contains NaN or Inf");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.x = select_rows(x, rows);
  out.feature_names = feature_names;
  out.target_name = target_name;
  out.scaler = scaler;
  out.y.reserve(rows.size());
  out.sample_index.reserve(rows.size());
  for (auto r : rows) {
    out.y.push_back(y[r]);
    out.sample_index.push_back(sample_index.empty() ? r : sample_index[r]);
    if (!batch.empty()) out.batch.push_back(batch[r]);
    if (!time.empty()) out.time.push_back(time[r]);
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    if (ch == delim && !quoted) {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan";
}

std::optional<double> parse_number(const std::string& cell) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name, const std::string& source) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::kMissingColumn, fmt::format("{}: no column '{}'", source, name));
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

Dataset parse_csv(std::istream& in, const CsvSchema& schema, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, source + ": missing header row");
  const auto header = split(line, schema.delimiter);

  const std::size_t target_col = column_of(header, schema.target, source);
  std::optional<std::size_t> batch_col, time_col;
  if (!schema.batch_column.empty()) batch_col = column_of(header, schema.batch_column, source);
  if (!schema.time_column.empty()) time_col = column_of(header, schema.time_column, source);

  std::vector<std::size_t> feature_cols;
  std::vector<std::string> names;
  if (schema.features.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (j == target_col || (batch_col && j == *batch_col) || (time_col && j == *time_col)) continue;
      feature_cols.push_back(j);
      names.push_back(header[j]);
    }
  } else {
    for (const auto& f : schema.features) {
      feature_cols.push_back(column_of(header, f, source));
      names.push_back(f);
    }
  }

  Dataset ds;
  ds.feature_names = names;
  ds.target_name = schema.target;
  std::vector<double> values;
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, schema.delimiter);
    if (cells.size() != header.size())
      throw Error(ErrorCode::kParseError,
                  fmt::format("{}: line {} has {} cells, header has {}", source, line_no, cells.size(), header.size()));
    const std::size_t this_row = row++;
    if (is_missing(cells[target_col])) {
      ++ds.dropped_missing_target;
      continue;
    }
    auto target = parse_number(cells[target_col]);
    if (!target)
      throw Error(ErrorCode::kNonNumericCell,
                  fmt::format("{}: row {}, column '{}': '{}'", source, this_row, header[target_col], cells[target_col]));
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const auto& cell = cells[feature_cols[k]];
      auto v = parse_number(cell);
      if (!v)
        throw Error(ErrorCode::kNonNumericCell,
                    fmt::format("{}: row {}, column '{}': '{}'", source, this_row, names[k], cell));
      values.push_back(*v);
    }
    ds.y.push_back(*target);
    ds.sample_index.push_back(this_row);
    if (batch_col) ds.batch.push_back(cells[*batch_col]);
    if (time_col) {
      auto t = parse_number(cells[*time_col]);
      if (!t)
        throw Error(ErrorCode::kNonNumericCell,
                    fmt::format("{}: row {}, column '{}': '{}'", source, this_row, header[*time_col], cells[*time_col]));
      ds.time.push_back(*t);
    }
  }
  ds.x = Matrix(ds.y.size(), feature_cols.size(), std::move(values));
  if (ds.dropped_missing_target > 0)
    spdlog::info("{}: dropped {} rows without a target value", source, ds.dropped_missing_target);
  ds.validate();
  return ds;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return parse_csv(in, schema, path);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << fmt::format("{:.17g}", columns[j][i]);
    out << '\n';
  }
}

Scaler autoscale_fit(const Dataset& train) {
  if (train.scaled()) throw Error(ErrorCode::kStateError, "data is already scaled");
  const std::size_t n = train.n_samples();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "auto-scaling needs at least two samples");
  auto mean_std = [n](auto get) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += get(i);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (get(i) - m) * (get(i) - m);
    return std::pair{m, std::sqrt(v / static_cast<double>(n - 1))};
  };
  Scaler s;
  for (std::size_t j = 0; j < train.n_features(); ++j) {
    auto [m, sd] = mean_std([&](std::size_t i) { return train.x(i, j); });
    if (!(sd > 0.0))
      throw Error(ErrorCode::kZeroVarianceFeature, fmt::format("feature '{}' is constant", train.feature_names[j]));
    s.feature_mean.push_back(m);
    s.feature_std.push_back(sd);
  }
  auto [m, sd] = mean_std([&](std::size_t i) { return train.y[i]; });
  if (!(sd > 0.0)) throw Error(ErrorCode::kZeroVarianceFeature, fmt::format("target '{}' is constant", train.target_name));
  s.target_mean = m;
  s.target_std = sd;
  return s;
}

Dataset autoscale_apply(const Scaler& scaler, const Dataset& data) {
  if (data.scaled()) throw Error(ErrorCode::kStateError, "data is already scaled");
  if (scaler.n_features() != data.n_features())
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("scaler has {} features, data has {}", scaler.n_features(), data.n_features()));
  Dataset out = data;
  for (std::size_t i = 0; i < out.n_samples(); ++i) {
    for (std::size_t j = 0; j < out.n_features(); ++j)
      out.x(i, j) = (out.x(i, j) - scaler.feature_mean[j]) / scaler.feature_std[j];
    out.y[i] = scaler.scale_target(out.y[i]);
  }
  out.scaler = scaler;
  return out;
}

Dataset autoscale_invert(const Dataset& data) {
  if (!data.scaled()) throw Error(ErrorCode::kStateError, "data is not scaled");
  const Scaler& s = *data.scaler;
  Dataset out = data;
  for (std::size_t i = 0; i < out.n_samples(); ++i) {
    for (std::size_t j = 0; j < out.n_features(); ++j)
      out.x(i, j) = out.x(i, j) * s.feature_std[j] + s.feature_mean[j];
    out.y[i] = s.unscale_target(out.y[i]);
  }
  out.scaler.reset();
  return out;
}

Matrix augment_intercept(const Matrix& x) {
  Matrix out(x.rows(), x.cols() + 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out(i, 0) = 1.0;
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j + 1) = x(i, j);
  }
  return out;
}

const std::vector<std::size_t>& LagSpec::delays_for(const std::string& name) const {
  auto it = per_variable.find(name);
  return it == per_variable.end() ? default_delays : it->second;
}

void LagSpec::validate() const {
  auto check = [](const std::vector<std::size_t>& d, const std::string& who) {
    if (d.empty()) throw Error(ErrorCode::kInvalidArgument, "empty delay list for " + who);
    for (std::size_t k = 1; k < d.size(); ++k)
      if (d[k] <= d[k - 1]) throw Error(ErrorCode::kInvalidArgument, "delays must be sorted and unique for " + who);
  };
  check(default_delays, "default");
  for (const auto& [name, d] : per_variable) check(d, name);
}

Dataset lag_features(const Dataset& data, const LagSpec& spec) {
  spec.validate();
  if (data.scaled()) throw Error(ErrorCode::kStateError, "lag features must be built before scaling");
  for (const auto& [name, d] : spec.per_variable) {
    if (std::find(data.feature_names.begin(), data.feature_names.end(), name) == data.feature_names.end())
      throw Error(ErrorCode::kMissingColumn, "lag spec names unknown variable '" + name + "'");
  }
  std::size_t max_delay = 0;
  std::size_t n_out_features = 0;
  for (const auto& name : data.feature_names) {
    const auto& d = spec.delays_for(name);
    max_delay = std::max(max_delay, d.back());
    n_out_features += d.size();
  }
  const std::size_t n = data.n_samples();
  if (max_delay >= n)
    throw Error(ErrorCode::kDelayTooLarge, fmt::format("delay {} leaves no rows out of {}", max_delay, n));

  const std::size_t n_out = n - max_delay;
  Dataset out;
  out.x = Matrix(n_out, n_out_features);
  out.target_name = data.target_name;
  out.dropped_missing_target = data.dropped_missing_target;
  for (std::size_t v = 0; v < data.n_features(); ++v)
    for (auto delta : spec.delays_for(data.feature_names[v]))
      out.feature_names.push_back(fmt::format("{}_lag{}", data.feature_names[v], delta));

  for (std::size_t r = 0; r < n_out; ++r) {
    const std::size_t src = r + max_delay;
    std::size_t col = 0;
    for (std::size_t v = 0; v < data.n_features(); ++v)
      for (auto delta : spec.delays_for(data.feature_names[v])) out.x(r, col++) = data.x(src - delta, v);
    out.y.push_back(data.y[src]);
    out.sample_index.push_back(data.sample_index.empty() ? src : data.sample_index[src]);
    if (data.has_batches()) out.batch.push_back(data.batch[src]);
    if (!data.time.empty()) out.time.push_back(data.time[src]);
  }
  return out;
}

std::vector<std::string> batch_labels(const Dataset& data) {
  std::vector<std::string> labels;
  std::set<std::string> seen;
  for (const auto& b : data.batch)
    if (seen.insert(b).second) labels.push_back(b);
  return labels;
}

BatchEvaluation leave_one_batch_out(const Dataset& data, const FitEvalFn& fit_eval) {
  if (!data.has_batches()) throw Error(ErrorCode::kSingleBatch, "data carries no batch ids");
  const auto labels = batch_labels(data);
  if (labels.size() < 2) throw Error(ErrorCode::kSingleBatch, "leave-one-batch-out needs at least two batches");

  BatchEvaluation eval;
  eval.folds.resize(labels.size());
  const long n_folds = static_cast<long>(labels.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long f = 0; f < n_folds; ++f) {
    FoldResult& fold = eval.folds[f];
    fold.batch = labels[f];
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < data.n_samples(); ++i)
      (data.batch[i] == labels[f] ? test_rows : train_rows).push_back(i);
    fold.n_test = test_rows.size();
    try {
      const Dataset train = data.subset(train_rows);
      const Dataset test = data.subset(test_rows);
      fold.y_pred = fit_eval(train, test);
      fold.y_true = test.y;
      if (fold.y_pred.size() != fold.y_true.size())
        throw Error(ErrorCode::kLengthMismatch, "fit_eval returned the wrong number of predictions");
      fold.metrics = compute_metrics(fold.y_true, fold.y_pred);
    } catch (const std::exception& e) {
      fold.failed = true;
      fold.error = e.what();
    }
  }

  double sum_rmse = 0.0, sum_mae = 0.0, sum_r2 = 0.0;
  std::size_t ok = 0, ok_r2 = 0;
  for (const auto& fold : eval.folds) {
    if (fold.failed) {
      ++eval.failed_folds;
      spdlog::warn("fold for batch '{}' failed: {}", fold.batch, fold.error);
      continue;
    }
    ++ok;
    sum_rmse += fold.metrics.rmse;
    sum_mae += fold.metrics.mae;
    if (std::isfinite(fold.metrics.r2)) {
      sum_r2 += fold.metrics.r2;
      ++ok_r2;
    }
    eval.pooled_true.insert(eval.pooled_true.end(), fold.y_true.begin(), fold.y_true.end());
    eval.pooled_pred.insert(eval.pooled_pred.end(), fold.y_pred.begin(), fold.y_pred.end());
  }
  if (ok == 0) throw Error(ErrorCode::kInvalidArgument, "every leave-one-batch-out fold failed");
  eval.averaged.rmse = sum_rmse / static_cast<double>(ok);
  eval.averaged.mae = sum_mae / static_cast<double>(ok);
  eval.averaged.r2 = ok_r2 ? sum_r2 / static_cast<double>(ok_r2) : std::numeric_limits<double>::quiet_NaN();
  return eval;
}

}  // namespace cmoe
