#pragma once

// Synthetic multimode process with known ground truth: block-contiguous
// regimes, each generating y from its own sparse linear model.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cmoe/dataset.hpp"
#include "cmoe/possibility.hpp"

namespace cmoe {

struct RegimeSegment {
  std::size_t begin = 0;  // first sample
  std::size_t end = 0;    // one past the last sample
  std::size_t context = 0;
};

struct SynthSpec {
  std::size_t n_contexts = 2;
  std::size_t n_features = 10;
  std::size_t n_samples = 1000;
  std::vector<std::vector<double>> theta;  // per context, d + 1 (intercept first)
  std::vector<double> noise_std;           // per context
  std::vector<RegimeSegment> schedule;     // empty: C equal blocks in order
  // Mean of feature 0 inside context c is shift * (2c/(C-1) - 1), which makes
  // regimes visible to a linear gate. Zero keeps all features N(0, 1).
  double mode_shift = 0.0;
  // Within this many samples of a regime boundary the generating context is
  // drawn at random, with the probability of the next regime ramping linearly.
  double overlap = 0.0;
  // Analyst labels: boundaries moved by label_shift samples and softened with
  // linear ramps of blur_width samples on each side.
  double label_shift = 0.0;
  double blur_width = 0.0;
  std::size_t n_batches = 0;  // > 0: samples are split into equal consecutive batches
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<RegimeSegment> effective_schedule() const;
};

// C contexts, d features, support_size nonzero coefficients per context drawn
// from distinct (when d allows) feature subsets with magnitudes in [1, 2].
SynthSpec default_synth_spec(std::size_t n_contexts, std::size_t n_features, std::size_t n_samples,
                             std::size_t support_size, double noise_std, std::uint64_t seed);

struct SynthData {
  Dataset data;                    // raw (unscaled); time = sample index
  std::vector<std::size_t> regime; // generating context per sample
  ContextMatrix exact;             // indicator of the generating context
  ContextMatrix nominal;           // indicator of the (shifted) analyst schedule
  ContextMatrix blurred;           // trapezoid-softened analyst schedule
  std::vector<std::vector<double>> theta;
  std::vector<double> noise_std;
};

SynthData generate(const SynthSpec& spec);

// Support of each true coefficient vector (indices j >= 1 into theta).
std::vector<std::vector<std::size_t>> true_supports(const SynthSpec& spec);

// Writes data.csv and a run config (config.json) describing the analyst
// schedule as alpha-certain contexts.
void write_synth_files(const SynthData& synth, const SynthSpec& spec, const std::string& out_dir);

}  // namespace cmoe
