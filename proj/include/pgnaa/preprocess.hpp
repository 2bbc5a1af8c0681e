#pragma once

// Channel-level preprocessing: subsetting, rebinning, peak detection and
// escape-peak / unique-peak channel weighting.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pgnaa/spectrum.hpp"

namespace pgnaa {

// Keeps the first max_channels channels. Throws OutOfRange unless
// 1 <= max_channels <= s.size().
Spectrum subset(const Spectrum& s, std::size_t max_channels);

// Sums consecutive groups of `factor` channels; output has ceil(n / factor)
// channels and a trailing partial group forms the last one. Totals are
// preserved exactly.
Spectrum rebin(const Spectrum& s, std::size_t factor);

// Matching profile transforms so calibrations stay consistent.
DetectorProfile subset_profile(const DetectorProfile& d, std::size_t max_channels);
DetectorProfile rebin_profile(const DetectorProfile& d, std::size_t factor);

inline constexpr double kElectronMassKev = 511.0;
inline constexpr double kPairThresholdKev = 2.0 * kElectronMassKev;

struct EscapePositions {
  std::optional<double> single_escape_kev;
  std::optional<double> double_escape_kev;
};

// Single and double escape peak energies for a photopeak at peak_energy_kev.
// Both exist only above the pair-production threshold of 1022 keV.
EscapePositions escape_peak_positions(double peak_energy_kev);

struct PeakParams {
  std::size_t window = 25;
  // Minimum height above the local median. Unset: 5x the spectrum's median count.
  std::optional<double> min_prominence;
};

// Channels that are strict maxima of their +-window neighbourhood and rise
// at least min_prominence above that neighbourhood's median.
PeakSet detect_peaks(const Spectrum& s, double min_prominence, std::size_t window,
                     const Calibration& calibration = {});
PeakSet detect_peaks(const Spectrum& s, const PeakParams& params, const Calibration& calibration = {});

double median_count(const Spectrum& s);

// Per alloy, the peak channels of its long-term spectrum with no other
// alloy's peak inside the +-window neighbourhood.
std::map<std::string, std::set<std::size_t>> unique_peaks(const AlloyLibrary& lib,
                                                          const PeakParams& params);

// Element-wise weighting. Spectra keep real-valued counts; distributions are
// renormalized. Throws LengthMismatch, or OutOfRange for negative weights.
Spectrum apply_channel_weights(const Spectrum& s, std::span<const double> weights);
CategoricalDistribution apply_channel_weights(const CategoricalDistribution& d,
                                              std::span<const double> weights);

struct BandWeighting {
  std::size_t half_width = 3;
  double factor = 1.5;
};

// Weight vector that multiplies a +-half_width band around each channel in
// `centers` by factor (bands do not compound where they overlap).
std::vector<double> band_weights(std::size_t n_channels, std::span<const std::size_t> centers,
                                 const BandWeighting& band);

// Channels of the escape and double escape peaks implied by the photopeaks in
// `peaks`, mapped through the detector calibration. Positions that fall
// outside the channel range are dropped.
std::vector<std::size_t> escape_peak_channels(const PeakSet& peaks, const DetectorProfile& d);

}  // namespace pgnaa
