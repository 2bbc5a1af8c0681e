#pragma once

// Synthetic alloy libraries: parametric prompt-gamma templates (element
// lines, exponential continuum, escape peaks) rendered through a Gaussian
// detector response onto a channel grid.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgnaa/spectrum.hpp"

namespace pgnaa {

struct GammaLine {
  double energy_kev = 0.0;
  double intensity = 0.0;  // relative, > 0
};

struct Continuum {
  double amplitude = 0.0;      // intensity per keV at 0 keV
  double decay_per_kev = 0.0;  // exp(-decay * E)
};

struct AlloyTemplate {
  std::string label;
  std::vector<GammaLine> lines;
  Continuum continuum;
  double escape_fraction = 0.1;  // in [0, 1)

  // Throws OutOfRange for non-positive intensities, energies outside the
  // profile's range, a negative continuum or a bad escape fraction.
  void validate(const DetectorProfile& profile) const;
};

// Gaussian photopeaks with fwhm(E) = a + b * sqrt(E) keV.
struct DetectorResponse {
  double fwhm_a_kev = 1.0;
  double fwhm_b = 0.03;

  double fwhm(double energy_kev) const;
};

DetectorResponse hpge_response();
DetectorResponse cebr3_response();
// CeBr3 response for profiles named "cebr3*", HPGe otherwise.
DetectorResponse response_for(const DetectorProfile& profile);

// Expected channel distribution. Each line contributes a Gaussian integrated
// over the channel width; lines above 1022 keV add escape and double escape
// Gaussians at E - 511 and E - 1022 with escape_fraction * intensity each.
// Throws DegenerateTemplate when nothing lands on the channel grid.
CategoricalDistribution render_expected(const AlloyTemplate& t, const DetectorResponse& response,
                                        const DetectorProfile& profile);

// Multinomial draw of total_counts photons from render_expected. Throws
// OutOfRange when total_counts < 1.
Spectrum render_long_term(const AlloyTemplate& t, const DetectorResponse& response, const DetectorProfile& profile,
                          std::int64_t total_counts, std::uint64_t seed);

// One hour at the profile's counting rate.
std::int64_t default_long_term_counts(const DetectorProfile& profile);

enum class MaterialKind { AluminiumLike, CopperLike };

std::string to_string(MaterialKind kind);
// Throws Config for unknown names.
MaterialKind material_kind_from_string(const std::string& name);

nlohmann::json to_json(const AlloyTemplate& t);
AlloyTemplate alloy_template_from_json(const nlohmann::json& j);
// {"material": ..., "templates": [...]}
std::vector<AlloyTemplate> templates_from_json(const nlohmann::json& j);
std::vector<AlloyTemplate> load_templates(const std::filesystem::path& path);

// The five built-in templates of a material.
std::vector<AlloyTemplate> default_templates(MaterialKind kind);

struct LibraryOptions {
  std::uint64_t seed = 0;
  // Photons per long-term spectrum; default one hour at the profile's rate.
  std::optional<std::int64_t> total_counts;
  // Default: response_for(profile).
  std::optional<DetectorResponse> response;
};

// Renders every template's long-term spectrum. Alloy a uses
// derive_seed(seed, LongTerm, a).
AlloyLibrary render_library(const std::vector<AlloyTemplate>& templates, const DetectorProfile& profile,
                            const LibraryOptions& options = {});
AlloyLibrary default_library(MaterialKind kind, const DetectorProfile& profile, const LibraryOptions& options = {});

}  // namespace pgnaa
