#pragma once

// Short-term spectrum synthesis by categorical (multinomial) sampling from
// long-term measurements.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pgnaa/rng.hpp"
#include "pgnaa/spectrum.hpp"

namespace pgnaa {

struct SamplingConfig {
  double measurement_time_s = 1.0;
  double counts_per_second = 0.0;
  std::uint64_t rng_seed = 0;

  // round(time * rate); throws OutOfRange if inputs are invalid or the
  // result is < 1.
  std::int64_t draw_count() const;
};

enum class SampleMode { Train, Test };

std::string_view to_string(SampleMode mode);

struct Provenance {
  std::string generator;  // "categorical", "cvae", ...
  std::uint64_t seed = 0;
  std::string mode;
  double measurement_time_s = 0.0;
  double counts_per_second = 0.0;
};

struct LabeledDataset {
  std::vector<Spectrum> spectra;
  std::vector<std::string> labels;
  Provenance provenance;

  std::size_t size() const noexcept { return spectra.size(); }
  bool empty() const noexcept { return spectra.empty(); }
  // Throws LengthMismatch when labels and spectra disagree or channel
  // counts differ.
  void validate() const;
  // Distinct labels in first-seen order.
  std::vector<std::string> distinct_labels() const;
};

// Multinomial draw of `draws` photons by sequential binomial conditioning,
// one channel at a time.
std::vector<double> sample_multinomial(std::span<const double> probs, std::int64_t draws, Engine& engine);

Spectrum sample_short(const CategoricalDistribution& dist, const SamplingConfig& cfg);

// Assigns every photon of long_term to one of k parts uniformly at random.
// Parts sum channel-wise to the input exactly. Throws OutOfRange if k < 2,
// total < k, or the spectrum has fractional counts.
std::vector<Spectrum> split_dependent(const Spectrum& long_term, std::size_t k, std::uint64_t seed);

inline constexpr std::size_t kTrainSplitParts = 6;

struct TrainingSetRequest {
  double measurement_time_s = 1.0;
  std::size_t n_per_alloy = 1;
  std::uint64_t seed = 0;
  SampleMode mode = SampleMode::Train;
  std::size_t split_parts = kTrainSplitParts;
  // Overrides the detector's rate when > 0.
  double counts_per_second = 0.0;
};

// Draws individual spectra of a training or test set on demand. Train mode
// samples round-robin from the distributions of the split parts of each
// long-term spectrum; test mode samples the full long-term distribution.
// sample(a, j) depends only on (request, a, j).
class TrainingSetSampler {
 public:
  TrainingSetSampler(const AlloyLibrary& lib, const TrainingSetRequest& req);

  Spectrum sample(std::size_t alloy, std::size_t index) const;
  std::size_t alloys() const noexcept { return sources_.size(); }
  std::int64_t draws() const noexcept { return draws_; }
  double counts_per_second() const noexcept { return rate_; }

 private:
  TrainingSetRequest req_;
  std::int64_t draws_ = 0;
  double rate_ = 0.0;
  std::vector<std::vector<CategoricalDistribution>> sources_;
};

// n_per_alloy spectra per label from TrainingSetSampler, ordered alloy-major.
LabeledDataset build_training_set(const AlloyLibrary& lib, const TrainingSetRequest& req);

// The per-spectrum seed used by build_training_set. Exposed so stream
// independence between train and test sets can be checked.
std::uint64_t sample_stream_seed(std::uint64_t seed, SampleMode mode, std::size_t alloy, std::size_t index);

}  // namespace pgnaa
