#pragma once

// File formats.
//
//   spectrum CSV   header "channel,count", one row per channel 0..n-1
//   dataset dir    spectrum CSVs + manifest.json (labels, seed, time, rate, generator)
//   library dir    long-term spectrum CSVs + library.json (detector profile, labels)
//   config JSON    detector profiles and weighting parameters

#include <filesystem>

#include <json.hpp>

#include "pgnaa/preprocess.hpp"
#include "pgnaa/sampling.hpp"
#include "pgnaa/spectrum.hpp"

namespace pgnaa {

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s);
// Throws Io on unreadable files or malformed / non-dense channel rows.
Spectrum read_spectrum_csv(const std::filesystem::path& path);

nlohmann::json to_json(const DetectorProfile& d);
DetectorProfile detector_profile_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PeakParams& p);
PeakParams peak_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BandWeighting& b);
BandWeighting band_weighting_from_json(const nlohmann::json& j);

inline constexpr int kDatasetFormatVersion = 1;

void save_dataset(const std::filesystem::path& dir, const LabeledDataset& ds);
LabeledDataset load_dataset(const std::filesystem::path& dir);

void save_library(const std::filesystem::path& dir, const AlloyLibrary& lib);
AlloyLibrary load_library(const std::filesystem::path& dir);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace pgnaa
