#pragma once

// Benchmark protocol: time sweeps over repeated train / test rounds and the
// HPGe versus CeBr3 comparison.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgnaa/classifiers.hpp"
#include "pgnaa/preprocess.hpp"
#include "pgnaa/synth.hpp"

namespace pgnaa {

// 100 * correct / total. Throws EmptyInput or LengthMismatch.
double accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& labels);

// Applied in order: subset, rebin, unique-peak weighting. Escape-peak
// weighting only touches MLC reference distributions.
struct PreprocessChain {
  std::optional<std::size_t> subset_channels;
  std::size_t rebin_factor = 1;
  std::optional<BandWeighting> unique_peak_weighting;
  std::optional<BandWeighting> escape_peak_weighting;
  PeakParams peak_params;
};

// A chain bound to one library: the transformed detector profile and the
// channel weights derived from its unique peaks.
class Preprocessor {
 public:
  Preprocessor(const AlloyLibrary& lib, const PreprocessChain& chain);

  Spectrum operator()(const Spectrum& s) const;
  LabeledDataset apply(LabeledDataset ds) const;
  const DetectorProfile& profile() const noexcept { return profile_; }
  const std::vector<double>& channel_weights() const noexcept { return weights_; }
  const PreprocessChain& chain() const noexcept { return chain_; }

 private:
  Spectrum reshape(const Spectrum& s) const;

  PreprocessChain chain_;
  DetectorProfile profile_;
  std::vector<double> weights_;
};

struct LibrarySource {
  // Saved library directory; when unset the library is synthesised.
  std::optional<std::filesystem::path> directory;
  MaterialKind material = MaterialKind::AluminiumLike;
  std::optional<std::filesystem::path> templates;  // overrides the built-in templates
  std::uint64_t seed = 0;
  std::optional<std::int64_t> long_term_counts;
};

AlloyLibrary load_or_render(const LibrarySource& source, const DetectorProfile& detector);

// {"directory": path} or {"synthetic": material, "seed", "templates", "long_term_counts"}.
LibrarySource library_source_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LibrarySource& source);

struct CvaeGeneratorConfig {
  std::size_t train_per_alloy = 2000;
  std::size_t hidden = 100;
  std::size_t latent = 10;
  CvaeTrainConfig train;
  GenerateOptions generate;
};

struct ExperimentConfig {
  std::string material = "aluminium-like";  // label written to the table
  LibrarySource library;
  DetectorProfile detector = hpge_aluminium_block();
  std::vector<ClassifierSpec> classifiers{ClassifierSpec{}};
  ReferenceGenerator generator = ReferenceGenerator::Categorical;
  PreprocessChain preprocessing;
  std::vector<double> times{0.2, 0.5, 1.0, 2.0, 5.0, 10.0};
  std::size_t n_train = 2000;  // per alloy
  std::size_t n_test = 1000;   // per alloy
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  CvaeGeneratorConfig cvae;

  // Throws Config on repeats < 1, an empty or non-increasing time grid, or
  // no classifiers.
  void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

// seed xor hash(r).
std::uint64_t repeat_seed(std::uint64_t seed, std::size_t repeat);

struct ResultRow {
  std::string classifier;
  std::string material;
  double time_s = 0.0;
  double accuracy_mean = 0.0;       // over successful repeats; NaN if none
  std::vector<double> accuracies;  // per repeat; NaN for a failed repeat
  double fit_ms = 0.0;
  double predict_ms = 0.0;
  std::vector<std::string> errors;  // "repeat r: message"
};

struct ResultTable {
  std::vector<ResultRow> rows;  // sorted by (classifier, time)

  bool has_failures() const;
  const ResultRow* find(const std::string& classifier, double time_s) const;
};

// For each time and repeat: build the training data, fit, draw an
// independent test set, score. MLC references and Kuiper long-term
// distributions do not depend on the time point and are fitted once per
// repeat. A failing repeat is recorded in the row and does not stop the
// sweep.
ResultTable run_time_sweep(const ExperimentConfig& cfg);
// Same, on an already loaded library (cfg.library is ignored).
ResultTable run_time_sweep(const ExperimentConfig& cfg, const AlloyLibrary& lib);

// classifier,material,time_s,accuracy_mean,acc_r1..acc_rk,fit_ms,predict_ms
std::string to_csv(const ResultTable& table);
nlohmann::json to_json(const ResultTable& table);

struct ComparisonRow {
  std::string classifier;
  double time_s = 0.0;
  double hpge_mean = 0.0;
  double cebr3_mean = 0.0;
};

struct DetectorComparison {
  ResultTable hpge;
  ResultTable cebr3;
  std::vector<ComparisonRow> rows;
  // Per classifier: first time with HPGe mean >= CeBr3 mean.
  std::vector<std::pair<std::string, std::optional<double>>> crossover;
};

// Joins two sweep results by (classifier, time). Throws MismatchedTimeGrids
// when the grids differ.
DetectorComparison join_detector_results(ResultTable hpge, ResultTable cebr3);
DetectorComparison compare_detectors(const ExperimentConfig& hpge, const ExperimentConfig& cebr3);

std::string to_csv(const DetectorComparison& c);
nlohmann::json to_json(const DetectorComparison& c);

}  // namespace pgnaa
