#include "pgnaa/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "pgnaa/error.hpp"

namespace pgnaa {

Spectrum subset(const Spectrum& s, std::size_t max_channels) {
  if (max_channels < 1 || max_channels > s.size()) {
    throw Error(ErrorCode::OutOfRange, "subset size " + std::to_string(max_channels) +
                                           " outside [1, " + std::to_string(s.size()) + "]");
  }
  auto c = s.counts();
  return Spectrum(std::vector<double>(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(max_channels)));
}

Spectrum rebin(const Spectrum& s, std::size_t factor) {
  if (factor < 1) throw Error(ErrorCode::OutOfRange, "rebin factor must be >= 1");
  const std::size_t n_out = (s.size() + factor - 1) / factor;
  std::vector<double> out(n_out, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) out[i / factor] += s[i];
  return Spectrum(std::move(out));
}

DetectorProfile subset_profile(const DetectorProfile& d, std::size_t max_channels) {
  if (max_channels < 1 || max_channels > d.n_channels) {
    throw Error(ErrorCode::OutOfRange, "subset size outside detector range");
  }
  DetectorProfile out = d;
  out.n_channels = max_channels;
  return out;
}

DetectorProfile rebin_profile(const DetectorProfile& d, std::size_t factor) {
  if (factor < 1) throw Error(ErrorCode::OutOfRange, "rebin factor must be >= 1");
  DetectorProfile out = d;
  out.n_channels = (d.n_channels + factor - 1) / factor;
  // Output channel k covers input channels [k*f, (k+1)*f); label it by the
  // centre of that range.
  const double f = static_cast<double>(factor);
  out.calibration.slope_kev = d.calibration.slope_kev * f;
  out.calibration.intercept_kev = d.calibration.intercept_kev + d.calibration.slope_kev * (f - 1.0) / 2.0;
  return out;
}

EscapePositions escape_peak_positions(double peak_energy_kev) {
  EscapePositions out;
  if (peak_energy_kev > kPairThresholdKev) {
    out.single_escape_kev = peak_energy_kev - kElectronMassKev;
    out.double_escape_kev = peak_energy_kev - kPairThresholdKev;
  }
  return out;
}

double median_count(const Spectrum& s) {
  std::vector<double> v(s.counts().begin(), s.counts().end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

PeakSet detect_peaks(const Spectrum& s, double min_prominence, std::size_t window,
                     const Calibration& calibration) {
  if (window < 1) throw Error(ErrorCode::OutOfRange, "peak window must be >= 1");
  PeakSet out;
  const std::size_t n = s.size();
  std::vector<double> neighbourhood;
  neighbourhood.reserve(2 * window + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= window ? i - window : 0;
    const std::size_t hi = std::min(n - 1, i + window);
    if (hi == lo) continue;
    bool strict_max = true;
    for (std::size_t j = lo; j <= hi && strict_max; ++j) {
      if (j != i && s[j] >= s[i]) strict_max = false;
    }
    if (!strict_max) continue;

    neighbourhood.assign(s.counts().begin() + static_cast<std::ptrdiff_t>(lo),
                         s.counts().begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    const std::size_t mid = neighbourhood.size() / 2;
    std::nth_element(neighbourhood.begin(), neighbourhood.begin() + static_cast<std::ptrdiff_t>(mid),
                     neighbourhood.end());
    double median = neighbourhood[mid];
    if (neighbourhood.size() % 2 == 0) {
      median = 0.5 * (median + *std::max_element(neighbourhood.begin(),
                                                 neighbourhood.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    const double height = s[i] - median;
    if (height > 0.0 && height >= min_prominence) {
      out.peaks.push_back({i, calibration.energy(static_cast<double>(i)), height});
    }
  }
  return out;
}

PeakSet detect_peaks(const Spectrum& s, const PeakParams& params, const Calibration& calibration) {
  const double prominence = params.min_prominence.value_or(5.0 * median_count(s));
  return detect_peaks(s, prominence, params.window, calibration);
}

std::map<std::string, std::set<std::size_t>> unique_peaks(const AlloyLibrary& lib, const PeakParams& params) {
  lib.validate();
  std::vector<PeakSet> per_alloy;
  per_alloy.reserve(lib.size());
  for (const auto& e : lib.entries) {
    per_alloy.push_back(detect_peaks(e.long_term, params, lib.detector.calibration));
  }

  std::map<std::string, std::set<std::size_t>> out;
  for (std::size_t a = 0; a < lib.size(); ++a) {
    auto& owned = out[lib.entries[a].label];
    for (const Peak& p : per_alloy[a].peaks) {
      bool shared = false;
      for (std::size_t b = 0; b < lib.size() && !shared; ++b) {
        if (b == a) continue;
        for (const Peak& q : per_alloy[b].peaks) {
          const std::size_t gap = p.channel > q.channel ? p.channel - q.channel : q.channel - p.channel;
          if (gap <= params.window) {
            shared = true;
            break;
          }
        }
      }
      if (!shared) owned.insert(p.channel);
    }
  }
  return out;
}

namespace {

void check_weights(std::size_t n, std::span<const double> weights) {
  if (weights.size() != n) {
    throw Error(ErrorCode::LengthMismatch, "weights have " + std::to_string(weights.size()) +
                                               " entries, expected " + std::to_string(n));
  }
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw Error(ErrorCode::OutOfRange, "weights must be finite and >= 0");
  }
}

}  // namespace

Spectrum apply_channel_weights(const Spectrum& s, std::span<const double> weights) {
  check_weights(s.size(), weights);
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] * weights[i];
  return Spectrum(std::move(out));
}

CategoricalDistribution apply_channel_weights(const CategoricalDistribution& d, std::span<const double> weights) {
  check_weights(d.size(), weights);
  std::vector<double> out(d.size());
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    out[i] = d[i] * weights[i];
    total += out[i];
  }
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroTotal, "weighting removed all probability mass");
  for (double& p : out) p /= total;
  return CategoricalDistribution(std::move(out));
}

std::vector<double> band_weights(std::size_t n_channels, std::span<const std::size_t> centers,
                                 const BandWeighting& band) {
  std::vector<double> w(n_channels, 1.0);
  for (std::size_t c : centers) {
    if (c >= n_channels) continue;
    const std::size_t lo = c >= band.half_width ? c - band.half_width : 0;
    const std::size_t hi = std::min(n_channels - 1, c + band.half_width);
    for (std::size_t i = lo; i <= hi; ++i) w[i] = band.factor;
  }
  return w;
}

std::vector<std::size_t> escape_peak_channels(const PeakSet& peaks, const DetectorProfile& d) {
  std::vector<std::size_t> out;
  auto push = [&](double energy) {
    const double ch = std::round(d.calibration.channel(energy));
    if (ch >= 0.0 && ch < static_cast<double>(d.n_channels)) out.push_back(static_cast<std::size_t>(ch));
  };
  for (const Peak& p : peaks.peaks) {
    const auto pos = escape_peak_positions(p.energy_kev);
    if (pos.single_escape_kev) push(*pos.single_escape_kev);
    if (pos.double_escape_kev) push(*pos.double_escape_kev);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace pgnaa
