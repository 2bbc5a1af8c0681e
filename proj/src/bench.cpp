#include "pgnaa/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "pgnaa/error.hpp"
#include "pgnaa/io.hpp"
#include "pgnaa/parallel.hpp"
#include "pgnaa/rng.hpp"

namespace pgnaa {

using json = nlohmann::json;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}
}  // namespace

double accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& labels) {
  if (predictions.empty()) throw Error(ErrorCode::EmptyInput, "accuracy of an empty prediction set");
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "predictions and labels differ in length");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------- preprocessing

Preprocessor::Preprocessor(const AlloyLibrary& lib, const PreprocessChain& chain) : chain_(chain), profile_(lib.detector) {
  lib.validate();
  if (chain_.subset_channels) profile_ = subset_profile(profile_, *chain_.subset_channels);
  if (chain_.rebin_factor > 1) profile_ = rebin_profile(profile_, chain_.rebin_factor);
  if (chain_.rebin_factor < 1) throw Error(ErrorCode::OutOfRange, "rebin factor must be >= 1");
  if (chain_.unique_peak_weighting) {
    AlloyLibrary reshaped{profile_, {}};
    for (const auto& e : lib.entries) reshaped.entries.push_back({e.label, reshape(e.long_term)});
    std::vector<std::size_t> centers;
    for (const auto& [label, channels] : unique_peaks(reshaped, chain_.peak_params)) {
      centers.insert(centers.end(), channels.begin(), channels.end());
    }
    std::sort(centers.begin(), centers.end());
    weights_ = band_weights(profile_.n_channels, centers, *chain_.unique_peak_weighting);
  }
}

Spectrum Preprocessor::reshape(const Spectrum& s) const {
  Spectrum out = chain_.subset_channels ? subset(s, *chain_.subset_channels) : s;
  if (chain_.rebin_factor > 1) out = rebin(out, chain_.rebin_factor);
  return out;
}

Spectrum Preprocessor::operator()(const Spectrum& s) const {
  Spectrum out = reshape(s);
  if (!weights_.empty()) out = apply_channel_weights(out, weights_);
  return out;
}

LabeledDataset Preprocessor::apply(LabeledDataset ds) const {
  for (auto& s : ds.spectra) s = (*this)(s);
  return ds;
}

// ---------------------------------------------------------------- config

AlloyLibrary load_or_render(const LibrarySource& source, const DetectorProfile& detector) {
  if (source.directory) return load_library(*source.directory);
  LibraryOptions opts;
  opts.seed = source.seed;
  opts.total_counts = source.long_term_counts;
  const std::vector<AlloyTemplate> templates =
      source.templates ? load_templates(*source.templates) : default_templates(source.material);
  return render_library(templates, detector, opts);
}

void ExperimentConfig::validate() const {
  if (repeats < 1) throw Error(ErrorCode::Config, "repeats must be >= 1");
  if (times.empty()) throw Error(ErrorCode::Config, "time grid is empty");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > 0.0)) throw Error(ErrorCode::Config, "measurement times must be > 0");
    if (i > 0 && !(times[i] > times[i - 1])) throw Error(ErrorCode::Config, "time grid must be strictly increasing");
  }
  if (classifiers.empty()) throw Error(ErrorCode::Config, "no classifiers configured");
  if (n_train < 1 || n_test < 1) throw Error(ErrorCode::Config, "n_train and n_test must be >= 1");
}

namespace {

ReferenceGenerator generator_from_string(const std::string& g) {
  if (g == "categorical") return ReferenceGenerator::Categorical;
  if (g == "cvae") return ReferenceGenerator::Cvae;
  throw Error(ErrorCode::Config, "unknown generator '" + g + "'");
}

std::string generator_name(ReferenceGenerator g) { return g == ReferenceGenerator::Cvae ? "cvae" : "categorical"; }

PreprocessChain chain_from_json(const json& j) {
  PreprocessChain c;
  if (j.contains("subset") && !j["subset"].is_null()) c.subset_channels = j["subset"].get<std::size_t>();
  c.rebin_factor = j.value("rebin", std::size_t{1});
  if (j.contains("unique_peaks") && !j["unique_peaks"].is_null()) {
    c.unique_peak_weighting = band_weighting_from_json(j["unique_peaks"]);
  }
  if (j.contains("escape_peaks") && !j["escape_peaks"].is_null()) {
    c.escape_peak_weighting = band_weighting_from_json(j["escape_peaks"]);
  }
  if (j.contains("peaks")) c.peak_params = peak_params_from_json(j["peaks"]);
  return c;
}

json to_json(const PreprocessChain& c) {
  json j = {{"rebin", c.rebin_factor}, {"peaks", to_json(c.peak_params)}};
  j["subset"] = c.subset_channels ? json(*c.subset_channels) : json(nullptr);
  j["unique_peaks"] = c.unique_peak_weighting ? to_json(*c.unique_peak_weighting) : json(nullptr);
  j["escape_peaks"] = c.escape_peak_weighting ? to_json(*c.escape_peak_weighting) : json(nullptr);
  return j;
}

}  // namespace

LibrarySource library_source_from_json(const json& l) {
  LibrarySource src;
  try {
    if (l.is_string()) {
      src.directory = l.get<std::string>();
      return src;
    }
    if (l.contains("directory")) src.directory = l["directory"].get<std::string>();
    if (l.contains("synthetic")) src.material = material_kind_from_string(l["synthetic"].get<std::string>());
    if (l.contains("templates")) src.templates = l["templates"].get<std::string>();
    src.seed = l.value("seed", src.seed);
    if (l.contains("long_term_counts")) src.long_term_counts = l["long_term_counts"].get<std::int64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("library: ") + e.what());
  }
  return src;
}

json to_json(const LibrarySource& source) {
  json lib;
  if (source.directory) {
    lib["directory"] = source.directory->string();
  } else {
    lib["synthetic"] = to_string(source.material);
    lib["seed"] = source.seed;
    if (source.templates) lib["templates"] = source.templates->string();
    if (source.long_term_counts) lib["long_term_counts"] = *source.long_term_counts;
  }
  return lib;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("library")) cfg.library = library_source_from_json(j["library"]);
    cfg.material = j.value("material", to_string(cfg.library.material));
    if (j.contains("detector")) cfg.detector = detector_profile_from_json(j["detector"]);
    if (j.contains("classifiers")) {
      cfg.classifiers.clear();
      for (const auto& c : j["classifiers"]) cfg.classifiers.push_back(classifier_spec_from_json(c));
    } else if (j.contains("classifier")) {
      cfg.classifiers = {classifier_spec_from_json(j["classifier"])};
    }
    cfg.generator = generator_from_string(j.value("generator", std::string("categorical")));
    if (j.contains("preprocessing")) cfg.preprocessing = chain_from_json(j["preprocessing"]);
    if (j.contains("times")) cfg.times = j["times"].get<std::vector<double>>();
    cfg.n_train = j.value("n_train", cfg.n_train);
    cfg.n_test = j.value("n_test", cfg.n_test);
    cfg.repeats = j.value("repeats", cfg.repeats);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("cvae")) {
      const json& c = j["cvae"];
      cfg.cvae.train_per_alloy = c.value("train_per_alloy", cfg.cvae.train_per_alloy);
      cfg.cvae.hidden = c.value("hidden", cfg.cvae.hidden);
      cfg.cvae.latent = c.value("latent", cfg.cvae.latent);
      cfg.cvae.train.epochs = c.value("epochs", cfg.cvae.train.epochs);
      cfg.cvae.train.batch_size = c.value("batch_size", cfg.cvae.train.batch_size);
      cfg.cvae.train.adam.learning_rate = c.value("learning_rate", cfg.cvae.train.adam.learning_rate);
      if (c.contains("beta")) cfg.cvae.train.beta = c["beta"].get<double>();
      cfg.cvae.generate.noise_sigma = c.value("noise_sigma", cfg.cvae.generate.noise_sigma);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("experiment config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  const json lib = to_json(cfg.library);
  json classifiers = json::array();
  for (const auto& c : cfg.classifiers) classifiers.push_back(to_json(c));
  json cvae = {{"train_per_alloy", cfg.cvae.train_per_alloy},
               {"hidden", cfg.cvae.hidden},
               {"latent", cfg.cvae.latent},
               {"epochs", cfg.cvae.train.epochs},
               {"batch_size", cfg.cvae.train.batch_size},
               {"learning_rate", cfg.cvae.train.adam.learning_rate},
               {"noise_sigma", cfg.cvae.generate.noise_sigma}};
  if (cfg.cvae.train.beta) cvae["beta"] = *cfg.cvae.train.beta;
  return {{"material", cfg.material},
          {"library", lib},
          {"detector", to_json(cfg.detector)},
          {"classifiers", classifiers},
          {"generator", generator_name(cfg.generator)},
          {"preprocessing", to_json(cfg.preprocessing)},
          {"times", cfg.times},
          {"n_train", cfg.n_train},
          {"n_test", cfg.n_test},
          {"repeats", cfg.repeats},
          {"seed", cfg.seed},
          {"test_sets", "resampled per repeat"},
          {"cvae", cvae}};
}

std::uint64_t repeat_seed(std::uint64_t seed, std::size_t repeat) {
  return seed ^ splitmix64(static_cast<std::uint64_t>(repeat));
}

// ---------------------------------------------------------------- sweep

namespace {

bool time_independent(const std::string& kind) { return kind == "mlc" || kind == "kuiper"; }

struct Cell {
  std::vector<double> accuracies;
  std::vector<double> fit_ms;
  std::vector<double> predict_ms;
  std::vector<std::string> errors;
};

LabeledDataset cvae_training_set(const AlloyLibrary& lib, double time_s, std::size_t n_per_alloy, std::uint64_t seed,
                                 const CvaeGeneratorConfig& cfg) {
  TrainingSetRequest req;
  req.measurement_time_s = time_s;
  req.n_per_alloy = cfg.train_per_alloy;
  req.seed = seed;
  const LabeledDataset sampled = build_training_set(lib, req);
  CvaeModel model({lib.detector.n_channels, cfg.hidden, cfg.latent, lib.size()}, lib.labels(),
                  derive_seed(seed, StreamDomain::CvaeInit));
  CvaeTrainConfig tc = cfg.train;
  tc.seed = derive_seed(seed, StreamDomain::CvaeShuffle);
  train(model, sampled, tc);
  LabeledDataset out;
  for (const auto& label : lib.labels()) {
    LabeledDataset part = generate(model, label, n_per_alloy, derive_seed(seed, StreamDomain::CvaeGenerate), cfg.generate);
    out.spectra.insert(out.spectra.end(), part.spectra.begin(), part.spectra.end());
    out.labels.insert(out.labels.end(), part.labels.begin(), part.labels.end());
  }
  out.provenance = {"cvae", seed, "train", time_s, lib.detector.counts_per_second};
  return out;
}

std::unique_ptr<Classifier> fit_time_independent(const ClassifierSpec& spec, const ExperimentConfig& cfg,
                                                 const AlloyLibrary& lib, const Preprocessor& pre,
                                                 std::uint64_t seed) {
  if (spec.kind == "kuiper") {
    auto k = std::make_unique<KuiperClassifier>();
    k->fit_library(lib, [&](const Spectrum& s) { return pre(s); });
    return k;
  }
  MlcFitOptions opts;
  opts.config = spec.mlc;
  opts.config.generator = cfg.generator;
  opts.config.cvae_train = cfg.cvae.train;
  opts.config.cvae_train_per_alloy = cfg.cvae.train_per_alloy;
  opts.config.cvae_hidden = cfg.cvae.hidden;
  opts.config.cvae_latent = cfg.cvae.latent;
  opts.seed = seed;
  opts.transform = [&](const Spectrum& s) { return pre(s); };
  opts.escape_weighting = pre.chain().escape_peak_weighting;
  opts.peak_params = pre.chain().peak_params;
  opts.transformed_profile = pre.profile();
  return std::make_unique<MlcClassifier>(mlc_fit(lib, opts));
}

}  // namespace

ResultTable run_time_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_time_sweep(cfg, load_or_render(cfg.library, cfg.detector));
}

ResultTable run_time_sweep(const ExperimentConfig& cfg, const AlloyLibrary& lib) {
  cfg.validate();
  const Preprocessor pre(lib, cfg.preprocessing);
  const std::size_t n_cls = cfg.classifiers.size();
  const std::size_t n_times = cfg.times.size();
  const std::size_t n_rep = cfg.repeats;

  // results[r][c][t]
  struct Outcome {
    double accuracy = kNaN;
    double fit_ms = 0.0;
    double predict_ms = 0.0;
    std::string error;
  };
  std::vector<std::vector<std::vector<Outcome>>> results(
      n_rep, std::vector<std::vector<Outcome>>(n_cls, std::vector<Outcome>(n_times)));

  parallel_for(n_rep, [&](std::size_t r) {
    const std::uint64_t seed_r = repeat_seed(cfg.seed, r);
    auto& out = results[r];

    std::vector<std::unique_ptr<Classifier>> fixed(n_cls);
    std::vector<double> fixed_fit_ms(n_cls, 0.0);
    std::vector<std::string> fixed_error(n_cls);
    for (std::size_t c = 0; c < n_cls; ++c) {
      if (!time_independent(cfg.classifiers[c].kind)) continue;
      try {
        const auto t0 = std::chrono::steady_clock::now();
        fixed[c] = fit_time_independent(cfg.classifiers[c], cfg, lib, pre, seed_r);
        fixed_fit_ms[c] = elapsed_ms(t0);
      } catch (const std::exception& e) {
        fixed_error[c] = e.what();
      }
    }

    for (std::size_t ti = 0; ti < n_times; ++ti) {
      const double time_s = cfg.times[ti];
      const std::uint64_t task_seed = derive_seed(seed_r, StreamDomain::Repeat, ti);
      LabeledDataset test;
      LabeledDataset train_set;
      std::string data_error;
      try {
        TrainingSetRequest req;
        req.measurement_time_s = time_s;
        req.n_per_alloy = cfg.n_test;
        req.seed = task_seed;
        req.mode = SampleMode::Test;
        test = pre.apply(build_training_set(lib, req));
      } catch (const std::exception& e) {
        data_error = e.what();
      }
      bool need_train = false;
      for (const auto& spec : cfg.classifiers) need_train |= !time_independent(spec.kind);
      if (data_error.empty() && need_train) {
        try {
          if (cfg.generator == ReferenceGenerator::Cvae) {
            train_set = pre.apply(cvae_training_set(lib, time_s, cfg.n_train, task_seed, cfg.cvae));
          } else {
            TrainingSetRequest req;
            req.measurement_time_s = time_s;
            req.n_per_alloy = cfg.n_train;
            req.seed = task_seed;
            req.mode = SampleMode::Train;
            train_set = pre.apply(build_training_set(lib, req));
          }
        } catch (const std::exception& e) {
          data_error = e.what();
        }
      }

      for (std::size_t c = 0; c < n_cls; ++c) {
        Outcome& o = out[c][ti];
        if (!data_error.empty()) {
          o.error = data_error;
          continue;
        }
        const ClassifierSpec& spec = cfg.classifiers[c];
        try {
          std::unique_ptr<Classifier> owned;
          const Classifier* model = nullptr;
          if (time_independent(spec.kind)) {
            if (!fixed_error[c].empty()) throw Error(ErrorCode::InvalidArgument, fixed_error[c]);
            model = fixed[c].get();
            o.fit_ms = fixed_fit_ms[c];
          } else {
            const auto t0 = std::chrono::steady_clock::now();
            owned = make_classifier(spec);
            owned->fit(train_set);
            o.fit_ms = elapsed_ms(t0);
            model = owned.get();
          }
          const auto t0 = std::chrono::steady_clock::now();
          std::vector<std::string> predictions(test.size());
          for (std::size_t i = 0; i < test.size(); ++i) predictions[i] = model->predict(test.spectra[i]);
          o.predict_ms = elapsed_ms(t0);
          o.accuracy = accuracy(predictions, test.labels);
        } catch (const std::exception& e) {
          o.error = e.what();
        }
      }
    }
  });

  ResultTable table;
  for (std::size_t c = 0; c < n_cls; ++c) {
    for (std::size_t ti = 0; ti < n_times; ++ti) {
      ResultRow row;
      row.classifier = cfg.classifiers[c].kind;
      row.material = cfg.material;
      row.time_s = cfg.times[ti];
      double sum = 0.0, fit = 0.0, pred = 0.0;
      std::size_t ok = 0;
      for (std::size_t r = 0; r < n_rep; ++r) {
        const Outcome& o = results[r][c][ti];
        row.accuracies.push_back(o.accuracy);
        if (!o.error.empty()) {
          row.errors.push_back("repeat " + std::to_string(r + 1) + ": " + o.error);
          continue;
        }
        sum += o.accuracy;
        fit += o.fit_ms;
        pred += o.predict_ms;
        ++ok;
      }
      row.accuracy_mean = ok > 0 ? sum / static_cast<double>(ok) : kNaN;
      row.fit_ms = ok > 0 ? fit / static_cast<double>(ok) : kNaN;
      row.predict_ms = ok > 0 ? pred / static_cast<double>(ok) : kNaN;
      table.rows.push_back(std::move(row));
    }
  }
  std::stable_sort(table.rows.begin(), table.rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return a.classifier != b.classifier ? a.classifier < b.classifier : a.time_s < b.time_s;
  });
  return table;
}

bool ResultTable::has_failures() const {
  return std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) { return !r.errors.empty(); });
}

const ResultRow* ResultTable::find(const std::string& classifier, double time_s) const {
  for (const auto& r : rows) {
    if (r.classifier == classifier && r.time_s == time_s) return &r;
  }
  return nullptr;
}

// ---------------------------------------------------------------- output

namespace {

std::string fmt(const char* spec, double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

}  // namespace

std::string to_csv(const ResultTable& table) {
  std::size_t k = 0;
  for (const auto& r : table.rows) k = std::max(k, r.accuracies.size());
  std::ostringstream out;
  out << "classifier,material,time_s,accuracy_mean";
  for (std::size_t i = 1; i <= k; ++i) out << ",acc_r" << i;
  out << ",fit_ms,predict_ms\n";
  for (const auto& r : table.rows) {
    out << r.classifier << ',' << r.material << ',' << fmt("%g", r.time_s) << ',' << fmt("%.4f", r.accuracy_mean);
    for (std::size_t i = 0; i < k; ++i) out << ',' << (i < r.accuracies.size() ? fmt("%.4f", r.accuracies[i]) : "");
    out << ',' << fmt("%.3f", r.fit_ms) << ',' << fmt("%.3f", r.predict_ms) << '\n';
  }
  return out.str();
}

json to_json(const ResultTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    json accs = json::array();
    for (double a : r.accuracies) accs.push_back(number_or_null(a));
    rows.push_back({{"classifier", r.classifier},
                    {"material", r.material},
                    {"time_s", r.time_s},
                    {"accuracy_mean", number_or_null(r.accuracy_mean)},
                    {"accuracies", accs},
                    {"fit_ms", number_or_null(r.fit_ms)},
                    {"predict_ms", number_or_null(r.predict_ms)},
                    {"errors", r.errors}});
  }
  return {{"rows", rows}};
}

DetectorComparison join_detector_results(ResultTable hpge, ResultTable cebr3) {
  std::set<double> grid_h, grid_c;
  for (const auto& r : hpge.rows) grid_h.insert(r.time_s);
  for (const auto& r : cebr3.rows) grid_c.insert(r.time_s);
  if (grid_h != grid_c) throw Error(ErrorCode::MismatchedTimeGrids, "detector sweeps use different time grids");

  DetectorComparison out;
  std::vector<std::string> order;
  for (const auto& r : hpge.rows) {
    const ResultRow* other = cebr3.find(r.classifier, r.time_s);
    if (other == nullptr) continue;
    out.rows.push_back({r.classifier, r.time_s, r.accuracy_mean, other->accuracy_mean});
    if (std::find(order.begin(), order.end(), r.classifier) == order.end()) order.push_back(r.classifier);
  }
  for (const auto& name : order) {
    std::optional<double> cross;
    for (const auto& row : out.rows) {
      if (row.classifier == name && row.hpge_mean >= row.cebr3_mean) {
        cross = row.time_s;
        break;
      }
    }
    out.crossover.emplace_back(name, cross);
  }
  out.hpge = std::move(hpge);
  out.cebr3 = std::move(cebr3);
  return out;
}

DetectorComparison compare_detectors(const ExperimentConfig& hpge, const ExperimentConfig& cebr3) {
  hpge.validate();
  cebr3.validate();
  if (hpge.times != cebr3.times) throw Error(ErrorCode::MismatchedTimeGrids, "detector configs use different time grids");
  return join_detector_results(run_time_sweep(hpge), run_time_sweep(cebr3));
}

std::string to_csv(const DetectorComparison& c) {
  std::ostringstream out;
  out << "classifier,time_s,hpge_mean,cebr3_mean,hpge_minus_cebr3\n";
  for (const auto& r : c.rows) {
    out << r.classifier << ',' << fmt("%g", r.time_s) << ',' << fmt("%.4f", r.hpge_mean) << ','
        << fmt("%.4f", r.cebr3_mean) << ',' << fmt("%.4f", r.hpge_mean - r.cebr3_mean) << '\n';
  }
  return out.str();
}

json to_json(const DetectorComparison& c) {
  json rows = json::array();
  for (const auto& r : c.rows) {
    rows.push_back({{"classifier", r.classifier},
                    {"time_s", r.time_s},
                    {"hpge_mean", number_or_null(r.hpge_mean)},
                    {"cebr3_mean", number_or_null(r.cebr3_mean)}});
  }
  json cross = json::object();
  for (const auto& [name, t] : c.crossover) cross[name] = t ? json(*t) : json(nullptr);
  return {{"rows", rows}, {"crossover_time_s", cross}, {"hpge", to_json(c.hpge)}, {"cebr3", to_json(c.cebr3)}};
}

}  // namespace pgnaa
