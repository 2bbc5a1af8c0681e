#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pgnaa {

// Photon counts per energy channel.
//
// Measured and sampled spectra hold whole numbers. Counts become fractional
// after channel weighting or decoder generation; the likelihood math only
// needs them to be non-negative.
class Spectrum {
 public:
  Spectrum() = default;
  // Throws OutOfRange on an empty vector, negative or non-finite counts.
  explicit Spectrum(std::vector<double> counts);

  std::size_t size() const noexcept { return counts_.size(); }
  std::span<const double> counts() const noexcept { return counts_; }
  double operator[](std::size_t i) const { return counts_[i]; }
  double total() const;

  // True when every count is a whole number.
  bool is_integral() const;

  friend bool operator==(const Spectrum&, const Spectrum&) = default;

 private:
  std::vector<double> counts_;
};

// Probability per channel; non-negative, sums to 1 within 1e-9.
class CategoricalDistribution {
 public:
  CategoricalDistribution() = default;
  explicit CategoricalDistribution(std::vector<double> probs);

  std::size_t size() const noexcept { return probs_.size(); }
  std::span<const double> probs() const noexcept { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  std::vector<double> probs_;
};

struct Calibration {
  double slope_kev = 1.0;  // keV per channel, > 0
  double intercept_kev = 0.0;

  double energy(double channel) const noexcept { return slope_kev * channel + intercept_kev; }
  double channel(double energy_kev) const noexcept {
    return (energy_kev - intercept_kev) / slope_kev;
  }
};

struct DetectorProfile {
  std::string name;
  std::size_t n_channels = 0;
  double counts_per_second = 0.0;
  Calibration calibration;

  // Throws OutOfRange when n_channels == 0, rate <= 0 or slope <= 0.
  void validate() const;
  double max_energy_kev() const noexcept {
    return calibration.energy(static_cast<double>(n_channels) - 1.0);
  }
};

struct LibraryEntry {
  std::string label;
  Spectrum long_term;
};

// Labelled long-term spectra recorded with one detector.
struct AlloyLibrary {
  DetectorProfile detector;
  std::vector<LibraryEntry> entries;

  // Throws on empty library, duplicate labels, or channel-count mismatch.
  void validate() const;
  std::vector<std::string> labels() const;
  std::size_t size() const noexcept { return entries.size(); }
};

struct Peak {
  std::size_t channel = 0;
  double energy_kev = 0.0;
  double height = 0.0;  // counts above the local median
};

struct PeakSet {
  std::vector<Peak> peaks;  // strictly increasing channels

  std::size_t size() const noexcept { return peaks.size(); }
  bool empty() const noexcept { return peaks.empty(); }
};

// counts / total. Throws ZeroTotal when the spectrum is empty.
CategoricalDistribution normalize(const Spectrum& s);

// (counts + 1) / sum(counts + 1); strictly positive for any input.
CategoricalDistribution smooth_add_one(const Spectrum& s);

// Throws OutOfRange when channel is outside [0, n_channels).
double channel_to_energy(const DetectorProfile& d, std::size_t channel);

// Built-in profiles with the per-setup counting rates of the reference
// measurements. Calibrations are synthetic defaults covering ~0..9.8 MeV.
DetectorProfile hpge_copper_block();
DetectorProfile hpge_aluminium_block();
DetectorProfile hpge_aluminium_chips();
DetectorProfile cebr3_aluminium_chips();
std::optional<DetectorProfile> builtin_profile(const std::string& name);
std::vector<std::string> builtin_profile_names();

}  // namespace pgnaa
