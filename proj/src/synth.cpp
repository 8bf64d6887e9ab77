#include "cmoe/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "cmoe/error.hpp"

namespace cmoe {

namespace {

std::vector<RegimeSegment> shifted(const std::vector<RegimeSegment>& sched, double shift, std::size_t n) {
  auto out = sched;
  const auto move = [&](std::size_t b) {
    const double v = std::clamp(static_cast<double>(b) + shift, 0.0, static_cast<double>(n));
    return static_cast<std::size_t>(std::llround(v));
  };
  for (std::size_t s = 0; s + 1 < out.size(); ++s) {
    const std::size_t b = move(out[s].end);
    out[s].end = b;
    out[s + 1].begin = b;
  }
  return out;
}

Matrix indicator(const std::vector<RegimeSegment>& sched, std::size_t k, std::size_t n) {
  Matrix pi(k, n, 0.0);
  for (const auto& seg : sched)
    for (std::size_t i = seg.begin; i < seg.end; ++i) pi(seg.context, i) = 1.0;
  return pi;
}

Matrix softened(const std::vector<RegimeSegment>& sched, std::size_t k, std::size_t n, double width) {
  if (width <= 0.0) return indicator(sched, k, n);
  Matrix pi(k, n, 0.0);
  const double last = static_cast<double>(n - 1);
  for (const auto& seg : sched) {
    if (seg.begin >= seg.end) continue;
    // Plateau over the segment, ramps of 'width' samples outside it. Ramps
    // that would start beyond the sample range are pushed out so the
    // plateau still reaches the edge.
    const double b = static_cast<double>(seg.begin);
    const double c = static_cast<double>(seg.end - 1);
    TrapezoidSpec t{b - width, b, c, c + width, 0.0};
    if (seg.begin == 0) t.a = -2.0, t.b = -1.0;
    if (seg.end == n) t.c = last + 1.0, t.d = last + 2.0;
    if (!(t.b < t.c)) t.c = t.b + 0.5, t.d = t.c + width;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = trapezoid_membership(t, static_cast<double>(i));
      pi(seg.context, i) = std::max(pi(seg.context, i), m);
    }
  }
  return pi;
}

std::vector<std::string> context_labels(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < k; ++c) out.push_back(fmt::format("regime{}", c));
  return out;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_contexts == 0 || n_features == 0 || n_samples == 0)
    throw Error(ErrorCode::kInvalidArgument, "synth: contexts, features and samples must be positive");
  if (theta.size() != n_contexts || noise_std.size() != n_contexts)
    throw Error(ErrorCode::kDimensionMismatch, "synth: one theta and noise level per context expected");
  for (const auto& t : theta)
    if (t.size() != n_features + 1) throw Error(ErrorCode::kDimensionMismatch, "synth: theta must have d + 1 entries");
  for (double s : noise_std)
    if (!(s >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "synth: noise std must be >= 0");
  if (overlap < 0.0 || blur_width < 0.0) throw Error(ErrorCode::kInvalidArgument, "synth: widths must be >= 0");
  if (n_samples < n_contexts) throw Error(ErrorCode::kInvalidArgument, "synth: fewer samples than contexts");
  if (n_batches > n_samples) throw Error(ErrorCode::kInvalidArgument, "synth: more batches than samples");
  std::size_t next = 0;
  for (const auto& seg : effective_schedule()) {
    if (seg.begin != next || seg.end < seg.begin || seg.context >= n_contexts)
      throw Error(ErrorCode::kInvalidArgument, "synth: schedule must cover the samples contiguously");
    next = seg.end;
  }
  if (next != n_samples) throw Error(ErrorCode::kInvalidArgument, "synth: schedule does not cover every sample");
}

std::vector<RegimeSegment> SynthSpec::effective_schedule() const {
  if (!schedule.empty()) return schedule;
  std::vector<RegimeSegment> out;
  for (std::size_t c = 0; c < n_contexts; ++c)
    out.push_back({c * n_samples / n_contexts, (c + 1) * n_samples / n_contexts, c});
  return out;
}

SynthSpec default_synth_spec(std::size_t n_contexts, std::size_t n_features, std::size_t n_samples,
                             std::size_t support_size, double noise_std, std::uint64_t seed) {
  if (support_size > n_features) throw Error(ErrorCode::kInvalidArgument, "synth: support larger than d");
  SynthSpec spec;
  spec.n_contexts = n_contexts;
  spec.n_features = n_features;
  spec.n_samples = n_samples;
  spec.seed = seed;
  spec.noise_std.assign(n_contexts, noise_std);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> mag(1.0, 2.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<std::size_t> order(n_features);
  std::iota(order.begin(), order.end(), 1);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t c = 0; c < n_contexts; ++c) {
    std::vector<double> t(n_features + 1, 0.0);
    t[0] = c % 2 == 0 ? 0.5 : -0.5;
    for (std::size_t s = 0; s < support_size; ++s) {
      const std::size_t j = order[(c * support_size + s) % n_features];
      t[j] = (sign(rng) ? 1.0 : -1.0) * mag(rng);
    }
    spec.theta.push_back(std::move(t));
  }
  return spec;
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_samples, d = spec.n_features, k = spec.n_contexts;
  const auto sched = spec.effective_schedule();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;

  SynthData out;
  out.theta = spec.theta;
  out.noise_std = spec.noise_std;
  out.regime.assign(n, 0);
  for (const auto& seg : sched)
    for (std::size_t i = seg.begin; i < seg.end; ++i) out.regime[i] = seg.context;
  if (spec.overlap > 0.0) {
    for (std::size_t s = 0; s + 1 < sched.size(); ++s) {
      const double b = static_cast<double>(sched[s].end);
      for (std::size_t i = 0; i < n; ++i) {
        const double pos = static_cast<double>(i) + 0.5;
        if (pos < b - spec.overlap || pos >= b + spec.overlap) continue;
        const double p_next = (pos - (b - spec.overlap)) / (2.0 * spec.overlap);
        out.regime[i] = unit(rng) < p_next ? sched[s + 1].context : sched[s].context;
      }
    }
  }

  Dataset& ds = out.data;
  ds.x = Matrix(n, d);
  ds.y.resize(n);
  ds.time.resize(n);
  ds.sample_index.resize(n);
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back(fmt::format("x{}", j + 1));
  ds.target_name = "y";
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = out.regime[i];
    const double center = k > 1 ? spec.mode_shift * (2.0 * static_cast<double>(c) / static_cast<double>(k - 1) - 1.0)
                                : 0.0;
    double y = spec.theta[c][0];
    for (std::size_t j = 0; j < d; ++j) {
      ds.x(i, j) = normal(rng) + (j == 0 ? center : 0.0);
      y += spec.theta[c][j + 1] * ds.x(i, j);
    }
    ds.y[i] = y + spec.noise_std[c] * normal(rng);
    ds.time[i] = static_cast<double>(i);
    ds.sample_index[i] = i;
  }
  if (spec.n_batches > 0) {
    ds.batch.resize(n);
    for (std::size_t i = 0; i < n; ++i) ds.batch[i] = fmt::format("b{:03d}", i * spec.n_batches / n);
  }

  const auto labels = context_labels(k);
  Matrix exact(k, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) exact(out.regime[i], i) = 1.0;
  out.exact = ContextMatrix(std::move(exact), labels);
  const auto analyst = shifted(sched, spec.label_shift, n);
  out.nominal = ContextMatrix(indicator(analyst, k, n), labels);
  out.blurred = ContextMatrix(softened(analyst, k, n, spec.blur_width), labels);
  return out;
}

std::vector<std::vector<std::size_t>> true_supports(const SynthSpec& spec) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& t : spec.theta) {
    std::vector<std::size_t> s;
    for (std::size_t j = 1; j < t.size(); ++j)
      if (t[j] != 0.0) s.push_back(j);
    out.push_back(std::move(s));
  }
  return out;
}

void write_synth_files(const SynthData& synth, const SynthSpec& spec, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, fmt::format("cannot create {}: {}", out_dir, ec.message()));

  const Dataset& ds = synth.data;
  std::vector<std::string> header = ds.feature_names;
  header.push_back(ds.target_name);
  header.push_back("time");
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < ds.n_features(); ++j) cols.push_back(ds.x.column(j));
  cols.push_back(ds.y);
  cols.push_back(ds.time);
  const std::string data_path = (fs::path(out_dir) / "data.csv").string();
  if (ds.has_batches()) {
    // write_csv only handles numeric columns; batches are written as ids.
    std::vector<double> ids(ds.n_samples());
    const auto labels = batch_labels(ds);
    for (std::size_t i = 0; i < ids.size(); ++i)
      ids[i] = static_cast<double>(std::find(labels.begin(), labels.end(), ds.batch[i]) - labels.begin());
    header.push_back("batch");
    cols.push_back(std::move(ids));
  }
  write_csv(data_path, header, cols);

  nlohmann::ordered_json cfg;
  cfg["data"] = {{"train", "data.csv"}, {"target", ds.target_name}, {"features", ds.feature_names},
                 {"time_column", "time"}};
  if (ds.has_batches()) cfg["data"]["batch_column"] = "batch";
  cfg["n_contexts"] = spec.n_contexts;
  const auto analyst = shifted(spec.effective_schedule(), spec.label_shift, spec.n_samples);
  nlohmann::ordered_json contexts = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < spec.n_contexts; ++c) {
    nlohmann::ordered_json ranges = nlohmann::ordered_json::array();
    for (const auto& seg : analyst)
      if (seg.context == c && seg.begin < seg.end) ranges.push_back({seg.begin, seg.end});
    contexts.push_back({{"name", synth.nominal.labels()[c]}, {"kind", "alpha_certain"}, {"alpha", 0.95},
                        {"ranges", ranges}});
  }
  cfg["contexts"] = contexts;
  cfg["train"] = {{"n_it", 6}, {"max_em_iters", 100}};
  cfg["tune"] = {{"grid", {0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 1.0}}, {"epsilon", 0.5}};
  cfg["evaluate"] = {{"test_fraction", 0.3}, {"n_perm", 2000}};
  cfg["output_dir"] = "out";
  cfg["seed"] = spec.seed;
  std::ofstream os(fs::path(out_dir) / "config.json");
  if (!os) throw Error(ErrorCode::kIoError, fmt::format("cannot write config in {}", out_dir));
  os << cfg.dump(2) << '\n';
}

}  // namespace cmoe
