#include "pgnaa/sampling.hpp"

#include <cmath>
#include <random>
#include <set>

#include "pgnaa/error.hpp"
#include "pgnaa/parallel.hpp"

namespace pgnaa {

std::int64_t SamplingConfig::draw_count() const {
  if (!(measurement_time_s > 0.0) || !std::isfinite(measurement_time_s)) {
    throw Error(ErrorCode::OutOfRange, "measurement time must be > 0");
  }
  if (!(counts_per_second > 0.0) || !std::isfinite(counts_per_second)) {
    throw Error(ErrorCode::OutOfRange, "counts per second must be > 0");
  }
  const auto n = static_cast<std::int64_t>(std::llround(measurement_time_s * counts_per_second));
  if (n < 1) throw Error(ErrorCode::OutOfRange, "measurement yields no photons");
  return n;
}

std::string_view to_string(SampleMode mode) { return mode == SampleMode::Train ? "train" : "test"; }

void LabeledDataset::validate() const {
  if (spectra.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "dataset has " + std::to_string(spectra.size()) + " spectra and " +
                                               std::to_string(labels.size()) + " labels");
  }
  for (const auto& s : spectra) {
    if (s.size() != spectra.front().size()) {
      throw Error(ErrorCode::LengthMismatch, "dataset spectra have differing channel counts");
    }
  }
}

std::vector<std::string> LabeledDataset::distinct_labels() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (seen.insert(l).second) out.push_back(l);
  }
  return out;
}

std::vector<double> sample_multinomial(std::span<const double> probs, std::int64_t draws, Engine& engine) {
  std::vector<double> out(probs.size(), 0.0);
  if (probs.empty() || draws <= 0) return out;
  double remaining_mass = 0.0;
  for (double p : probs) remaining_mass += p;
  std::int64_t remaining = draws;
  for (std::size_t i = 0; i < probs.size() && remaining > 0; ++i) {
    const double p = probs[i];
    if (p <= 0.0) continue;
    std::int64_t x = remaining;
    const double q = p / remaining_mass;
    if (q < 1.0 && i + 1 < probs.size()) {
      std::binomial_distribution<std::int64_t> binom(remaining, q);
      x = binom(engine);
    }
    out[i] = static_cast<double>(x);
    remaining -= x;
    remaining_mass -= p;
    if (remaining_mass <= 0.0) remaining_mass = 0.0;
  }
  if (remaining > 0) {
    // Rounding left mass unassigned; give it to the last channel with
    // positive probability.
    for (std::size_t i = probs.size(); i-- > 0;) {
      if (probs[i] > 0.0) {
        out[i] += static_cast<double>(remaining);
        break;
      }
    }
  }
  return out;
}

Spectrum sample_short(const CategoricalDistribution& dist, const SamplingConfig& cfg) {
  Engine engine = make_engine(derive_seed(cfg.rng_seed, StreamDomain::Direct));
  return Spectrum(sample_multinomial(dist.probs(), cfg.draw_count(), engine));
}

std::vector<Spectrum> split_dependent(const Spectrum& long_term, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::OutOfRange, "split needs k >= 2");
  if (!long_term.is_integral()) throw Error(ErrorCode::OutOfRange, "split needs whole-number counts");
  if (long_term.total() < static_cast<double>(k)) {
    throw Error(ErrorCode::OutOfRange, "split needs at least k photons");
  }
  Engine engine = make_engine(seed);
  const std::size_t n = long_term.size();
  std::vector<std::vector<double>> parts(k, std::vector<double>(n, 0.0));
  for (std::size_t c = 0; c < n; ++c) {
    auto remaining = static_cast<std::int64_t>(long_term[c]);
    for (std::size_t j = 0; j < k && remaining > 0; ++j) {
      std::int64_t x = remaining;
      if (j + 1 < k) {
        std::binomial_distribution<std::int64_t> binom(remaining, 1.0 / static_cast<double>(k - j));
        x = binom(engine);
      }
      parts[j][c] = static_cast<double>(x);
      remaining -= x;
    }
  }
  std::vector<Spectrum> out;
  out.reserve(k);
  for (auto& p : parts) out.emplace_back(std::move(p));
  return out;
}

std::uint64_t sample_stream_seed(std::uint64_t seed, SampleMode mode, std::size_t alloy, std::size_t index) {
  const StreamDomain domain = mode == SampleMode::Train ? StreamDomain::TrainSample : StreamDomain::TestSample;
  return derive_seed(seed, domain, alloy, index);
}

TrainingSetSampler::TrainingSetSampler(const AlloyLibrary& lib, const TrainingSetRequest& req) : req_(req) {
  lib.validate();
  SamplingConfig base;
  base.measurement_time_s = req.measurement_time_s;
  base.counts_per_second = req.counts_per_second > 0.0 ? req.counts_per_second : lib.detector.counts_per_second;
  draws_ = base.draw_count();
  rate_ = base.counts_per_second;

  sources_.resize(lib.size());
  for (std::size_t a = 0; a < lib.size(); ++a) {
    const Spectrum& lt = lib.entries[a].long_term;
    if (req.mode == SampleMode::Train) {
      for (const Spectrum& part : split_dependent(lt, req.split_parts, derive_seed(req.seed, StreamDomain::Split, a))) {
        sources_[a].push_back(normalize(part));
      }
    } else {
      sources_[a].push_back(normalize(lt));
    }
  }
}

Spectrum TrainingSetSampler::sample(std::size_t alloy, std::size_t index) const {
  const auto& src = sources_.at(alloy)[index % sources_[alloy].size()];
  Engine engine = make_engine(sample_stream_seed(req_.seed, req_.mode, alloy, index));
  return Spectrum(sample_multinomial(src.probs(), draws_, engine));
}

LabeledDataset build_training_set(const AlloyLibrary& lib, const TrainingSetRequest& req) {
  if (req.n_per_alloy < 1) throw Error(ErrorCode::OutOfRange, "n_per_alloy must be >= 1");
  const TrainingSetSampler sampler(lib, req);
  const std::size_t n_total = lib.size() * req.n_per_alloy;
  LabeledDataset out;
  out.spectra.resize(n_total);
  out.labels.resize(n_total);
  parallel_for(n_total, [&](std::size_t idx) {
    const std::size_t a = idx / req.n_per_alloy;
    out.spectra[idx] = sampler.sample(a, idx % req.n_per_alloy);
    out.labels[idx] = lib.entries[a].label;
  });
  out.provenance = {"categorical", req.seed, std::string(to_string(req.mode)), req.measurement_time_s,
                    sampler.counts_per_second()};
  return out;
}

}  // namespace pgnaa
