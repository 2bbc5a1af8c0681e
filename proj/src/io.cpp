#include "pgnaa/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pgnaa/error.hpp"

namespace pgnaa {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string format_count(double c) {
  char buf[64];
  if (c == std::floor(c) && std::abs(c) < 9.0e15) {
    std::snprintf(buf, sizeof buf, "%.0f", c);
  } else {
    std::snprintf(buf, sizeof buf, "%.17g", c);
  }
  return buf;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

void write_spectrum_csv(const fs::path& path, const Spectrum& s) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "channel,count\n";
  for (std::size_t i = 0; i < s.size(); ++i) out << i << ',' << format_count(s[i]) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

Spectrum read_spectrum_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "channel,count") {
    throw Error(ErrorCode::Io, path.string() + ": expected header 'channel,count'");
  }
  std::vector<double> counts;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos) {
      throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(line_no) + ": missing comma");
    }
    const std::string_view ch_text = trim(row.substr(0, comma));
    std::size_t channel = 0;
    const auto [p, ec] = std::from_chars(ch_text.data(), ch_text.data() + ch_text.size(), channel);
    if (ec != std::errc{} || p != ch_text.data() + ch_text.size() || channel != counts.size()) {
      throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(line_no) +
                                     ": channels must be dense and start at 0");
    }
    const std::string count_text(trim(row.substr(comma + 1)));
    char* end = nullptr;
    const double value = std::strtod(count_text.c_str(), &end);
    if (count_text.empty() || end != count_text.c_str() + count_text.size()) {
      throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(line_no) + ": bad count");
    }
    counts.push_back(value);
  }
  if (counts.empty()) throw Error(ErrorCode::Io, path.string() + ": no channels");
  return Spectrum(std::move(counts));
}

json to_json(const DetectorProfile& d) {
  return {{"name", d.name},
          {"n_channels", d.n_channels},
          {"counts_per_second", d.counts_per_second},
          {"calibration", {{"slope_kev", d.calibration.slope_kev}, {"intercept_kev", d.calibration.intercept_kev}}}};
}

DetectorProfile detector_profile_from_json(const json& j) {
  try {
    DetectorProfile d;
    if (j.is_string()) {
      auto builtin = builtin_profile(j.get<std::string>());
      if (!builtin) throw Error(ErrorCode::Config, "unknown detector profile '" + j.get<std::string>() + "'");
      return *builtin;
    }
    if (j.contains("base")) {
      auto builtin = builtin_profile(j.at("base").get<std::string>());
      if (!builtin) throw Error(ErrorCode::Config, "unknown base profile");
      d = *builtin;
    }
    d.name = j.value("name", d.name);
    d.n_channels = j.value("n_channels", d.n_channels);
    d.counts_per_second = j.value("counts_per_second", d.counts_per_second);
    if (j.contains("calibration")) {
      const auto& c = j.at("calibration");
      d.calibration.slope_kev = c.value("slope_kev", d.calibration.slope_kev);
      d.calibration.intercept_kev = c.value("intercept_kev", d.calibration.intercept_kev);
    }
    d.validate();
    return d;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("detector profile: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) throw;
    throw Error(ErrorCode::Config, e.what());
  }
}

json to_json(const PeakParams& p) {
  json j = {{"window", p.window}};
  if (p.min_prominence) j["min_prominence"] = *p.min_prominence;
  return j;
}

PeakParams peak_params_from_json(const json& j) {
  PeakParams p;
  p.window = j.value("window", p.window);
  if (j.contains("min_prominence") && !j.at("min_prominence").is_null()) {
    p.min_prominence = j.at("min_prominence").get<double>();
  }
  return p;
}

json to_json(const BandWeighting& b) { return {{"half_width", b.half_width}, {"factor", b.factor}}; }

BandWeighting band_weighting_from_json(const json& j) {
  BandWeighting b;
  b.half_width = j.value("half_width", b.half_width);
  b.factor = j.value("factor", b.factor);
  if (!(b.factor >= 0.0)) throw Error(ErrorCode::Config, "weighting factor must be >= 0");
  return b;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

void save_dataset(const fs::path& dir, const LabeledDataset& ds) {
  ds.validate();
  fs::create_directories(dir);
  json entries = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "spectrum_%06zu.csv", i);
    write_spectrum_csv(dir / name, ds.spectra[i]);
    entries.push_back({{"file", name}, {"label", ds.labels[i]}});
  }
  json manifest = {{"format", "pgnaa-dataset"},
                   {"version", kDatasetFormatVersion},
                   {"generator", ds.provenance.generator},
                   {"seed", ds.provenance.seed},
                   {"mode", ds.provenance.mode},
                   {"measurement_time_s", ds.provenance.measurement_time_s},
                   {"counts_per_second", ds.provenance.counts_per_second},
                   {"n_channels", ds.empty() ? 0 : ds.spectra.front().size()},
                   {"entries", entries}};
  write_json_file(dir / "manifest.json", manifest);
}

LabeledDataset load_dataset(const fs::path& dir) {
  const json m = read_json_file(dir / "manifest.json");
  if (m.value("format", "") != "pgnaa-dataset") throw Error(ErrorCode::Config, dir.string() + ": not a dataset");
  if (m.value("version", 0) != kDatasetFormatVersion) {
    throw Error(ErrorCode::Config, dir.string() + ": unsupported dataset version");
  }
  LabeledDataset ds;
  ds.provenance.generator = m.value("generator", "");
  ds.provenance.seed = m.value("seed", std::uint64_t{0});
  ds.provenance.mode = m.value("mode", "");
  ds.provenance.measurement_time_s = m.value("measurement_time_s", 0.0);
  ds.provenance.counts_per_second = m.value("counts_per_second", 0.0);
  for (const auto& e : m.at("entries")) {
    ds.spectra.push_back(read_spectrum_csv(dir / e.at("file").get<std::string>()));
    ds.labels.push_back(e.at("label").get<std::string>());
  }
  ds.validate();
  return ds;
}

void save_library(const fs::path& dir, const AlloyLibrary& lib) {
  lib.validate();
  fs::create_directories(dir);
  json entries = json::array();
  for (std::size_t i = 0; i < lib.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "long_term_%02zu.csv", i);
    write_spectrum_csv(dir / name, lib.entries[i].long_term);
    entries.push_back({{"file", name}, {"label", lib.entries[i].label}});
  }
  json manifest = {{"format", "pgnaa-library"},
                   {"version", kDatasetFormatVersion},
                   {"detector", to_json(lib.detector)},
                   {"entries", entries}};
  write_json_file(dir / "library.json", manifest);
}

AlloyLibrary load_library(const fs::path& dir) {
  const json m = read_json_file(dir / "library.json");
  if (m.value("format", "") != "pgnaa-library") throw Error(ErrorCode::Config, dir.string() + ": not a library");
  AlloyLibrary lib;
  lib.detector = detector_profile_from_json(m.at("detector"));
  for (const auto& e : m.at("entries")) {
    lib.entries.push_back({e.at("label").get<std::string>(), read_spectrum_csv(dir / e.at("file").get<std::string>())});
  }
  lib.validate();
  return lib;
}

}  // namespace pgnaa
