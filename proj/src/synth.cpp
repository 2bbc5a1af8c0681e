#include "pgnaa/synth.hpp"

#include <cmath>
#include <fstream>

#include "pgnaa/error.hpp"
#include "pgnaa/parallel.hpp"
#include "pgnaa/preprocess.hpp"
#include "pgnaa/rng.hpp"
#include "pgnaa/sampling.hpp"

namespace pgnaa {

namespace detail {
// Template files embedded at build time.
extern const char* const kAluminiumLikeTemplates;
extern const char* const kCopperLikeTemplates;
}  // namespace detail

using json = nlohmann::json;

void AlloyTemplate::validate(const DetectorProfile& profile) const {
  if (lines.empty() && continuum.amplitude <= 0.0) {
    throw Error(ErrorCode::DegenerateTemplate, "template '" + label + "' has no lines and no continuum");
  }
  const double lo = profile.calibration.energy(0.0);
  const double hi = profile.max_energy_kev();
  for (const GammaLine& l : lines) {
    if (!(l.intensity > 0.0) || !std::isfinite(l.intensity)) {
      throw Error(ErrorCode::OutOfRange, "template '" + label + "': line intensities must be > 0");
    }
    if (!(l.energy_kev >= lo && l.energy_kev <= hi)) {
      throw Error(ErrorCode::OutOfRange, "template '" + label + "': line at " + std::to_string(l.energy_kev) +
                                             " keV outside the detector range");
    }
  }
  if (continuum.amplitude < 0.0 || continuum.decay_per_kev < 0.0) {
    throw Error(ErrorCode::OutOfRange, "template '" + label + "': continuum parameters must be >= 0");
  }
  if (!(escape_fraction >= 0.0 && escape_fraction < 1.0)) {
    throw Error(ErrorCode::OutOfRange, "template '" + label + "': escape fraction must be in [0, 1)");
  }
}

double DetectorResponse::fwhm(double energy_kev) const {
  return fwhm_a_kev + fwhm_b * std::sqrt(std::max(energy_kev, 0.0));
}

DetectorResponse hpge_response() { return {1.0, 0.03}; }
DetectorResponse cebr3_response() { return {20.0, 0.9}; }

DetectorResponse response_for(const DetectorProfile& profile) {
  return profile.name.rfind("cebr3", 0) == 0 ? cebr3_response() : hpge_response();
}

namespace {

constexpr double kFwhmToSigma = 2.3548200450309493;

// Adds `intensity` times the Gaussian mass of each channel.
void add_gaussian(std::vector<double>& out, const Calibration& cal, double mean_kev, double fwhm_kev,
                  double intensity) {
  const double sigma = fwhm_kev / kFwhmToSigma;
  if (!(sigma > 0.0)) throw Error(ErrorCode::OutOfRange, "detector fwhm must be > 0");
  const double inv = 1.0 / (sigma * std::sqrt(2.0));
  const double centre = cal.channel(mean_kev);
  const double reach = 8.0 * sigma / cal.slope_kev + 1.0;
  const auto n = static_cast<std::ptrdiff_t>(out.size());
  const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(centre - reach)));
  const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::ceil(centre + reach)));
  for (std::ptrdiff_t i = lo; i <= hi; ++i) {
    const double e_lo = cal.energy(static_cast<double>(i) - 0.5);
    const double e_hi = cal.energy(static_cast<double>(i) + 0.5);
    out[static_cast<std::size_t>(i)] +=
        intensity * 0.5 * (std::erf((e_hi - mean_kev) * inv) - std::erf((e_lo - mean_kev) * inv));
  }
}

}  // namespace

CategoricalDistribution render_expected(const AlloyTemplate& t, const DetectorResponse& response,
                                        const DetectorProfile& profile) {
  profile.validate();
  t.validate(profile);
  const Calibration& cal = profile.calibration;
  std::vector<double> out(profile.n_channels, 0.0);

  if (t.continuum.amplitude > 0.0) {
    const double a = t.continuum.amplitude;
    const double k = t.continuum.decay_per_kev;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double e_lo = std::max(0.0, cal.energy(static_cast<double>(i) - 0.5));
      const double e_hi = std::max(0.0, cal.energy(static_cast<double>(i) + 0.5));
      out[i] += k > 0.0 ? a / k * (std::exp(-k * e_lo) - std::exp(-k * e_hi)) : a * (e_hi - e_lo);
    }
  }
  for (const GammaLine& line : t.lines) {
    add_gaussian(out, cal, line.energy_kev, response.fwhm(line.energy_kev), line.intensity);
    const EscapePositions esc = escape_peak_positions(line.energy_kev);
    const double escape_intensity = t.escape_fraction * line.intensity;
    if (escape_intensity > 0.0 && esc.single_escape_kev) {
      add_gaussian(out, cal, *esc.single_escape_kev, response.fwhm(*esc.single_escape_kev), escape_intensity);
      add_gaussian(out, cal, *esc.double_escape_kev, response.fwhm(*esc.double_escape_kev), escape_intensity);
    }
  }

  double total = 0.0;
  for (double v : out) total += v;
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateTemplate, "template '" + t.label + "' renders to zero mass");
  for (double& v : out) v /= total;
  return CategoricalDistribution(std::move(out));
}

Spectrum render_long_term(const AlloyTemplate& t, const DetectorResponse& response, const DetectorProfile& profile,
                          std::int64_t total_counts, std::uint64_t seed) {
  if (total_counts < 1) throw Error(ErrorCode::OutOfRange, "long-term spectrum needs at least one photon");
  const CategoricalDistribution expected = render_expected(t, response, profile);
  Engine engine = make_engine(seed);
  return Spectrum(sample_multinomial(expected.probs(), total_counts, engine));
}

std::int64_t default_long_term_counts(const DetectorProfile& profile) {
  return static_cast<std::int64_t>(std::llround(3600.0 * profile.counts_per_second));
}

std::string to_string(MaterialKind kind) {
  return kind == MaterialKind::AluminiumLike ? "aluminium-like" : "copper-like";
}

MaterialKind material_kind_from_string(const std::string& name) {
  if (name == "aluminium-like" || name == "aluminium" || name == "al") return MaterialKind::AluminiumLike;
  if (name == "copper-like" || name == "copper" || name == "cu") return MaterialKind::CopperLike;
  throw Error(ErrorCode::Config, "unknown material '" + name + "'");
}

json to_json(const AlloyTemplate& t) {
  json lines = json::array();
  for (const GammaLine& l : t.lines) lines.push_back({{"energy_kev", l.energy_kev}, {"intensity", l.intensity}});
  return {{"label", t.label},
          {"lines", lines},
          {"continuum", {{"amplitude", t.continuum.amplitude}, {"decay_per_kev", t.continuum.decay_per_kev}}},
          {"escape_fraction", t.escape_fraction}};
}

AlloyTemplate alloy_template_from_json(const json& j) {
  try {
    AlloyTemplate t;
    t.label = j.at("label").get<std::string>();
    for (const auto& l : j.at("lines")) {
      t.lines.push_back({l.at("energy_kev").get<double>(), l.at("intensity").get<double>()});
    }
    if (j.contains("continuum")) {
      t.continuum.amplitude = j["continuum"].value("amplitude", 0.0);
      t.continuum.decay_per_kev = j["continuum"].value("decay_per_kev", 0.0);
    }
    t.escape_fraction = j.value("escape_fraction", t.escape_fraction);
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("alloy template: ") + e.what());
  }
}

std::vector<AlloyTemplate> templates_from_json(const json& j) {
  if (!j.contains("templates") || !j["templates"].is_array()) {
    throw Error(ErrorCode::Config, "template file needs a 'templates' array");
  }
  std::vector<AlloyTemplate> out;
  for (const auto& t : j["templates"]) out.push_back(alloy_template_from_json(t));
  return out;
}

std::vector<AlloyTemplate> load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  try {
    return templates_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config, path.string() + ": " + e.what());
  }
}

std::vector<AlloyTemplate> default_templates(MaterialKind kind) {
  const char* text =
      kind == MaterialKind::AluminiumLike ? detail::kAluminiumLikeTemplates : detail::kCopperLikeTemplates;
  return templates_from_json(json::parse(text));
}

AlloyLibrary render_library(const std::vector<AlloyTemplate>& templates, const DetectorProfile& profile,
                            const LibraryOptions& options) {
  profile.validate();
  const DetectorResponse response = options.response.value_or(response_for(profile));
  const std::int64_t counts = options.total_counts.value_or(default_long_term_counts(profile));
  AlloyLibrary lib;
  lib.detector = profile;
  lib.entries.resize(templates.size());
  parallel_for(templates.size(), [&](std::size_t a) {
    lib.entries[a] = {templates[a].label, render_long_term(templates[a], response, profile, counts,
                                                           derive_seed(options.seed, StreamDomain::LongTerm, a))};
  });
  lib.validate();
  return lib;
}

AlloyLibrary default_library(MaterialKind kind, const DetectorProfile& profile, const LibraryOptions& options) {
  return render_library(default_templates(kind), profile, options);
}

}  // namespace pgnaa
