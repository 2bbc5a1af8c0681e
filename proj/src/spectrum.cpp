#include "pgnaa/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pgnaa/error.hpp"
#include "pgnaa/kernels.hpp"

namespace pgnaa {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroTotal: return "ZeroTotal";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::DegenerateTemplate: return "DegenerateTemplate";
    case ErrorCode::MismatchedTimeGrids: return "MismatchedTimeGrids";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

Spectrum::Spectrum(std::vector<double> counts) : counts_(std::move(counts)) {
  if (counts_.empty()) throw Error(ErrorCode::OutOfRange, "spectrum needs at least one channel");
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (!std::isfinite(counts_[i]) || counts_[i] < 0.0) {
      throw Error(ErrorCode::OutOfRange,
                  "channel " + std::to_string(i) + " has invalid count " + std::to_string(counts_[i]));
    }
  }
}

double Spectrum::total() const { return kernels::sum(counts_); }

bool Spectrum::is_integral() const {
  return std::all_of(counts_.begin(), counts_.end(), [](double c) { return c == std::floor(c); });
}

CategoricalDistribution::CategoricalDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw Error(ErrorCode::OutOfRange, "distribution needs at least one channel");
  double total = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) throw Error(ErrorCode::OutOfRange, "invalid probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::OutOfRange, "probabilities sum to " + std::to_string(total));
  }
}

void DetectorProfile::validate() const {
  if (n_channels == 0) throw Error(ErrorCode::OutOfRange, "detector '" + name + "' has no channels");
  if (!(counts_per_second > 0.0) || !std::isfinite(counts_per_second)) {
    throw Error(ErrorCode::OutOfRange, "detector '" + name + "' needs counts_per_second > 0");
  }
  if (!(calibration.slope_kev > 0.0)) {
    throw Error(ErrorCode::OutOfRange, "detector '" + name + "' needs a positive slope");
  }
}

void AlloyLibrary::validate() const {
  detector.validate();
  if (entries.empty()) throw Error(ErrorCode::EmptyInput, "alloy library is empty");
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.label).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate alloy label '" + e.label + "'");
    }
    if (e.long_term.size() != detector.n_channels) {
      throw Error(ErrorCode::LengthMismatch,
                  "alloy '" + e.label + "' has " + std::to_string(e.long_term.size()) +
                      " channels, detector has " + std::to_string(detector.n_channels));
    }
  }
}

std::vector<std::string> AlloyLibrary::labels() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.label);
  return out;
}

CategoricalDistribution normalize(const Spectrum& s) {
  const double total = s.total();
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroTotal, "cannot normalize an empty spectrum");
  std::vector<double> probs(s.counts().begin(), s.counts().end());
  for (double& p : probs) p /= total;
  return CategoricalDistribution(std::move(probs));
}

CategoricalDistribution smooth_add_one(const Spectrum& s) {
  const double total = s.total() + static_cast<double>(s.size());
  std::vector<double> probs(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) probs[i] = (s[i] + 1.0) / total;
  return CategoricalDistribution(std::move(probs));
}

double channel_to_energy(const DetectorProfile& d, std::size_t channel) {
  if (channel >= d.n_channels) {
    throw Error(ErrorCode::OutOfRange, "channel " + std::to_string(channel) + " outside detector range");
  }
  return d.calibration.energy(static_cast<double>(channel));
}

DetectorProfile hpge_copper_block() { return {"hpge-cu-block", 16384, 30000.0, {0.6, 0.0}}; }
DetectorProfile hpge_aluminium_block() { return {"hpge-al-block", 16384, 19000.0, {0.6, 0.0}}; }
DetectorProfile hpge_aluminium_chips() { return {"hpge-al-chips", 16384, 7000.0, {0.6, 0.0}}; }
DetectorProfile cebr3_aluminium_chips() { return {"cebr3-al-chips", 2048, 11000.0, {4.8, 0.0}}; }

std::optional<DetectorProfile> builtin_profile(const std::string& name) {
  for (auto make : {hpge_copper_block, hpge_aluminium_block, hpge_aluminium_chips, cebr3_aluminium_chips}) {
    DetectorProfile p = make();
    if (p.name == name) return p;
  }
  return std::nullopt;
}

std::vector<std::string> builtin_profile_names() {
  return {"hpge-cu-block", "hpge-al-block", "hpge-al-chips", "cebr3-al-chips"};
}

}  // namespace pgnaa
