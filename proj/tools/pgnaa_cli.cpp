// pgnaa command-line interface.
//
//   pgnaa gen-synth          write a synthetic alloy library
//   pgnaa sample             draw short-term spectra from a library
//   pgnaa train              fit a classifier and save it
//   pgnaa classify           label spectrum CSVs with a saved classifier
//   pgnaa train-cvae         fit a conditional VAE on a dataset
//   pgnaa generate           sample spectra from a saved CVAE
//   pgnaa bench              accuracy over a measurement-time grid
//   pgnaa compare-detectors  HPGe vs CeBr3 sweep and crossover
//
// Every subcommand takes --config <json>; flags override its keys.
// Exit codes: 0 ok, 1 runtime error, 2 config error, 3 partial failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgnaa/bench.hpp"
#include "pgnaa/classifiers.hpp"
#include "pgnaa/cvae.hpp"
#include "pgnaa/error.hpp"
#include "pgnaa/io.hpp"
#include "pgnaa/log.hpp"
#include "pgnaa/parallel.hpp"
#include "pgnaa/synth.hpp"

using json = nlohmann::json;
using namespace pgnaa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::Config, path + ": expected a JSON object");
  return j;
}

template <typename T>
void override_key(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
}

DetectorProfile detector_from(const json& j, const char* fallback) {
  return detector_profile_from_json(j.contains("detector") ? j["detector"] : json(fallback));
}

// "library": directory string or source object; "material" alone selects a
// synthetic library.
AlloyLibrary library_from(const json& j, const DetectorProfile& detector) {
  LibrarySource src;
  if (j.contains("library")) src = library_source_from_json(j["library"]);
  if (j.contains("material")) src.material = material_kind_from_string(j["material"].get<std::string>());
  if (j.contains("library_seed")) src.seed = j["library_seed"].get<std::uint64_t>();
  return load_or_render(src, detector);
}

// ---------------------------------------------------------------- gen-synth

struct GenSynthArgs {
  std::string config, out;
  std::optional<std::string> material, detector, templates;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> long_term_counts;
};

int run_gen_synth(const GenSynthArgs& a) {
  json j = load_config(a.config);
  override_key(j, "material", a.material);
  override_key(j, "detector", a.detector);
  override_key(j, "templates", a.templates);
  override_key(j, "seed", a.seed);
  override_key(j, "long_term_counts", a.long_term_counts);

  LibrarySource src;
  src.material = material_kind_from_string(j.value("material", std::string("aluminium-like")));
  if (j.contains("templates")) src.templates = j["templates"].get<std::string>();
  src.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("long_term_counts")) src.long_term_counts = j["long_term_counts"].get<std::int64_t>();
  const AlloyLibrary lib = load_or_render(src, detector_from(j, "hpge-al-block"));
  save_library(a.out, lib);
  std::printf("wrote %zu long-term spectra to %s\n", lib.size(), a.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
  std::string config, out;
  std::optional<std::string> library, material, detector, mode;
  std::optional<double> time_s, rate;
  std::optional<std::size_t> n_per_alloy;
  std::optional<std::uint64_t> seed;
};

int run_sample(const SampleArgs& a) {
  json j = load_config(a.config);
  override_key(j, "library", a.library);
  override_key(j, "material", a.material);
  override_key(j, "detector", a.detector);
  override_key(j, "mode", a.mode);
  override_key(j, "time_s", a.time_s);
  override_key(j, "counts_per_second", a.rate);
  override_key(j, "n_per_alloy", a.n_per_alloy);
  override_key(j, "seed", a.seed);

  const AlloyLibrary lib = library_from(j, detector_from(j, "hpge-al-block"));
  TrainingSetRequest req;
  req.measurement_time_s = j.value("time_s", req.measurement_time_s);
  req.n_per_alloy = j.value("n_per_alloy", std::size_t{10});
  req.seed = j.value("seed", req.seed);
  req.counts_per_second = j.value("counts_per_second", 0.0);
  const std::string mode = j.value("mode", std::string("train"));
  if (mode == "train") {
    req.mode = SampleMode::Train;
  } else if (mode == "test") {
    req.mode = SampleMode::Test;
  } else {
    throw Error(ErrorCode::Config, "mode must be train or test, got '" + mode + "'");
  }
  const LabeledDataset ds = build_training_set(lib, req);
  save_dataset(a.out, ds);
  std::printf("wrote %zu spectra to %s\n", ds.size(), a.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config, out;
  std::optional<std::string> classifier, train_dir, library, material, detector;
  std::optional<std::size_t> n_refs;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  json j = load_config(a.config);
  if (a.classifier) j["classifier"] = *a.classifier;
  override_key(j, "train", a.train_dir);
  override_key(j, "library", a.library);
  override_key(j, "material", a.material);
  override_key(j, "detector", a.detector);
  override_key(j, "seed", a.seed);

  ClassifierSpec spec = classifier_spec_from_json(j.value("classifier", json("mlc")));
  if (a.n_refs) spec.mlc.n_refs = *a.n_refs;

  std::unique_ptr<Classifier> model;
  if (j.contains("train")) {
    const std::string dir = j["train"].get<std::string>();
    const LabeledDataset ds = load_dataset(dir);
    model = make_classifier(spec);
    if (auto* nb = dynamic_cast<NeighborsBase*>(model.get())) nb->set_training_manifest(dir);
    model->fit(ds);
  } else if (spec.kind == "mlc" || spec.kind == "kuiper") {
    const AlloyLibrary lib = library_from(j, detector_from(j, "hpge-al-block"));
    if (spec.kind == "kuiper") {
      auto k = std::make_unique<KuiperClassifier>();
      k->fit_library(lib);
      model = std::move(k);
    } else {
      MlcFitOptions opts;
      opts.config = spec.mlc;
      opts.seed = j.value("seed", std::uint64_t{0});
      model = std::make_unique<MlcClassifier>(mlc_fit(lib, opts));
    }
  } else {
    throw Error(ErrorCode::Config, spec.kind + " needs a training dataset (--train)");
  }
  save_classifier(*model, a.out);
  std::printf("saved %s classifier over %zu labels to %s\n", model->kind().c_str(), model->labels().size(),
              a.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------- classify

struct ClassifyArgs {
  std::string model;
  std::vector<std::string> spectra;
  bool scores = false;
};

int run_classify(const ClassifyArgs& a) {
  const auto model = load_classifier(a.model);
  std::cout << "file,label";
  if (a.scores) {
    for (const auto& l : model->labels()) std::cout << ",score_" << l;
  }
  std::cout << '\n';
  for (const auto& path : a.spectra) {
    const Spectrum s = read_spectrum_csv(path);
    std::cout << path << ',' << model->predict(s);
    if (a.scores) {
      for (double v : model->predict_scores(s)) std::cout << ',' << v;
    }
    std::cout << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- train-cvae

struct TrainCvaeArgs {
  std::string config, out;
  std::optional<std::string> train_dir;
  std::optional<std::size_t> hidden, latent, epochs, batch_size;
  std::optional<double> learning_rate, beta;
  std::optional<std::uint64_t> seed;
};

int run_train_cvae(const TrainCvaeArgs& a) {
  json j = load_config(a.config);
  override_key(j, "train", a.train_dir);
  override_key(j, "hidden", a.hidden);
  override_key(j, "latent", a.latent);
  override_key(j, "epochs", a.epochs);
  override_key(j, "batch_size", a.batch_size);
  override_key(j, "learning_rate", a.learning_rate);
  override_key(j, "beta", a.beta);
  override_key(j, "seed", a.seed);
  if (!j.contains("train")) throw Error(ErrorCode::Config, "train-cvae needs a training dataset (--train)");

  const LabeledDataset ds = load_dataset(j["train"].get<std::string>());
  if (ds.empty()) throw Error(ErrorCode::EmptyTrainingSet, "training dataset is empty");
  CvaeShape shape;
  shape.input = ds.spectra.front().size();
  shape.hidden = j.value("hidden", shape.hidden);
  shape.latent = j.value("latent", shape.latent);
  const auto labels = ds.distinct_labels();
  shape.labels = labels.size();
  const std::uint64_t seed = j.value("seed", std::uint64_t{0});

  CvaeTrainConfig tc;
  tc.epochs = j.value("epochs", tc.epochs);
  tc.batch_size = j.value("batch_size", tc.batch_size);
  tc.adam.learning_rate = j.value("learning_rate", tc.adam.learning_rate);
  if (j.contains("beta")) tc.beta = j["beta"].get<double>();
  tc.seed = derive_seed(seed, StreamDomain::CvaeShuffle);

  CvaeModel model(shape, labels, derive_seed(seed, StreamDomain::CvaeInit));
  const TrainHistory h = train(model, ds, tc);
  save_cvae(model, a.out);
  std::printf("trained %zu steps, final epoch loss %.6g, saved to %s\n", h.steps,
              h.epoch_loss.empty() ? 0.0 : h.epoch_loss.back(), a.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string model, out;
  std::vector<std::string> labels;
  std::size_t count = 10;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
};

int run_generate(const GenerateArgs& a) {
  const CvaeModel model = load_cvae(a.model);
  const auto labels = a.labels.empty() ? model.labels() : a.labels;
  LabeledDataset out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const LabeledDataset part = generate(model, labels[i], a.count, derive_seed(a.seed, StreamDomain::CvaeGenerate, i),
                                         {a.noise_sigma});
    out.spectra.insert(out.spectra.end(), part.spectra.begin(), part.spectra.end());
    out.labels.insert(out.labels.end(), part.labels.begin(), part.labels.end());
  }
  out.provenance = {"cvae", a.seed, "train", 0.0, 0.0};
  save_dataset(a.out, out);
  std::printf("wrote %zu spectra to %s\n", out.size(), a.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct SweepOverrides {
  std::optional<std::string> classifier, detector, library, material;
  std::vector<double> times;
  std::optional<std::size_t> n_train, n_test, repeats;
  std::optional<std::uint64_t> seed;

  void apply(json& j) const {
    if (classifier) j["classifiers"] = json::array({*classifier});
    override_key(j, "detector", detector);
    if (library) j["library"] = {{"directory", *library}};
    if (material) j["library"] = {{"synthetic", *material}};
    if (!times.empty()) j["times"] = times;
    override_key(j, "n_train", n_train);
    override_key(j, "n_test", n_test);
    override_key(j, "repeats", repeats);
    override_key(j, "seed", seed);
  }
};

void add_sweep_options(CLI::App* cmd, SweepOverrides& o) {
  cmd->add_option("--classifier", o.classifier, "Single classifier kind");
  cmd->add_option("--detector", o.detector, "Built-in detector profile");
  cmd->add_option("--library", o.library, "Saved library directory");
  cmd->add_option("--material", o.material, "Synthetic library material");
  cmd->add_option("--times", o.times, "Measurement times in seconds")->delimiter(',');
  cmd->add_option("--n-train", o.n_train, "Training spectra per alloy");
  cmd->add_option("--n-test", o.n_test, "Test spectra per alloy");
  cmd->add_option("--repeats", o.repeats);
  cmd->add_option("--seed", o.seed);
}

void report_errors(const ResultTable& t) {
  for (const auto& row : t.rows) {
    for (const auto& e : row.errors) {
      std::cerr << row.classifier << " @ " << row.time_s << " s, " << e << '\n';
    }
  }
}

struct BenchArgs {
  std::string config, csv, json_out, manifest;
  SweepOverrides sweep;
};

int run_bench(const BenchArgs& a) {
  json j = load_config(a.config);
  a.sweep.apply(j);
  const ExperimentConfig cfg = experiment_config_from_json(j);
  const ResultTable table = run_time_sweep(cfg);
  write_text(a.csv, to_csv(table));
  if (!a.json_out.empty()) write_json_file(a.json_out, to_json(table));
  if (!a.manifest.empty()) write_json_file(a.manifest, to_json(cfg));
  report_errors(table);
  return table.has_failures() ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------- compare-detectors

struct CompareArgs {
  std::string config, csv, json_out;
  SweepOverrides sweep;
};

// Base keys apply to both sweeps; "hpge" / "cebr3" objects override them.
int run_compare(const CompareArgs& a) {
  json base = load_config(a.config);
  a.sweep.apply(base);
  json hpge = base, cebr3 = base;
  hpge.erase("hpge");
  hpge.erase("cebr3");
  cebr3.erase("hpge");
  cebr3.erase("cebr3");
  hpge["detector"] = "hpge-al-chips";
  cebr3["detector"] = "cebr3-al-chips";
  if (base.contains("hpge")) hpge.merge_patch(base["hpge"]);
  if (base.contains("cebr3")) cebr3.merge_patch(base["cebr3"]);

  const DetectorComparison c =
      compare_detectors(experiment_config_from_json(hpge), experiment_config_from_json(cebr3));
  write_text(a.csv, to_csv(c));
  if (!a.json_out.empty()) write_json_file(a.json_out, to_json(c));
  for (const auto& [kind, t] : c.crossover) {
    if (t) {
      std::cerr << kind << ": crossover at " << *t << " s\n";
    } else {
      std::cerr << kind << ": no crossover on this grid\n";
    }
  }
  report_errors(c.hpge);
  report_errors(c.cebr3);
  return c.hpge.has_failures() || c.cebr3.has_failures() ? kExitPartial : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PGNAA alloy classification toolkit"};
  app.require_subcommand(1);
  unsigned threads = 0;
  bool quiet = false;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");
  app.add_flag("--quiet", quiet, "Suppress warnings");

  GenSynthArgs gs;
  auto* c_gs = app.add_subcommand("gen-synth", "Write a synthetic alloy library");
  c_gs->add_option("--config", gs.config);
  c_gs->add_option("--out", gs.out, "Library directory")->required();
  c_gs->add_option("--material", gs.material, "aluminium-like or copper-like");
  c_gs->add_option("--detector", gs.detector, "Built-in detector profile");
  c_gs->add_option("--templates", gs.templates, "Template JSON file");
  c_gs->add_option("--seed", gs.seed);
  c_gs->add_option("--long-term-counts", gs.long_term_counts);

  SampleArgs sa;
  auto* c_sa = app.add_subcommand("sample", "Draw short-term spectra from a library");
  c_sa->add_option("--config", sa.config);
  c_sa->add_option("--out", sa.out, "Dataset directory")->required();
  c_sa->add_option("--library", sa.library, "Saved library directory");
  c_sa->add_option("--material", sa.material, "Synthetic library material");
  c_sa->add_option("--detector", sa.detector);
  c_sa->add_option("--mode", sa.mode, "train or test");
  c_sa->add_option("--time", sa.time_s, "Measurement time in seconds");
  c_sa->add_option("--rate", sa.rate, "Counts per second override");
  c_sa->add_option("--n-per-alloy", sa.n_per_alloy);
  c_sa->add_option("--seed", sa.seed);

  TrainArgs ta;
  auto* c_ta = app.add_subcommand("train", "Fit a classifier and save it");
  c_ta->add_option("--config", ta.config);
  c_ta->add_option("--out", ta.out, "Model file")->required();
  c_ta->add_option("--classifier", ta.classifier, "mlc, kuiper, knn, rnc, lr or svm");
  c_ta->add_option("--train", ta.train_dir, "Training dataset directory");
  c_ta->add_option("--library", ta.library, "Library directory (mlc, kuiper)");
  c_ta->add_option("--material", ta.material, "Synthetic library material (mlc, kuiper)");
  c_ta->add_option("--detector", ta.detector);
  c_ta->add_option("--n-refs", ta.n_refs, "MLC references per alloy");
  c_ta->add_option("--seed", ta.seed);

  ClassifyArgs ca;
  auto* c_ca = app.add_subcommand("classify", "Label spectrum CSV files");
  c_ca->add_option("--model", ca.model)->required();
  c_ca->add_option("spectra", ca.spectra, "Spectrum CSV files")->required();
  c_ca->add_flag("--scores", ca.scores, "Print per-label scores");

  TrainCvaeArgs tc;
  auto* c_tc = app.add_subcommand("train-cvae", "Fit a conditional VAE");
  c_tc->add_option("--config", tc.config);
  c_tc->add_option("--out", tc.out, "Model file")->required();
  c_tc->add_option("--train", tc.train_dir, "Training dataset directory");
  c_tc->add_option("--hidden", tc.hidden);
  c_tc->add_option("--latent", tc.latent);
  c_tc->add_option("--epochs", tc.epochs);
  c_tc->add_option("--batch-size", tc.batch_size);
  c_tc->add_option("--learning-rate", tc.learning_rate);
  c_tc->add_option("--beta", tc.beta);
  c_tc->add_option("--seed", tc.seed);

  GenerateArgs ga;
  auto* c_ga = app.add_subcommand("generate", "Sample spectra from a CVAE");
  c_ga->add_option("--model", ga.model)->required();
  c_ga->add_option("--out", ga.out, "Dataset directory")->required();
  c_ga->add_option("--label", ga.labels, "Labels to generate (default all)");
  c_ga->add_option("--count", ga.count, "Spectra per label");
  c_ga->add_option("--seed", ga.seed);
  c_ga->add_option("--noise-sigma", ga.noise_sigma);

  BenchArgs ba;
  auto* c_ba = app.add_subcommand("bench", "Accuracy over a measurement-time grid");
  c_ba->add_option("--config", ba.config);
  c_ba->add_option("--csv", ba.csv, "CSV output (default stdout)");
  c_ba->add_option("--json", ba.json_out, "JSON mirror of the table");
  c_ba->add_option("--manifest", ba.manifest, "Resolved configuration");
  add_sweep_options(c_ba, ba.sweep);

  CompareArgs co;
  auto* c_co = app.add_subcommand("compare-detectors", "HPGe vs CeBr3 time sweep");
  c_co->add_option("--config", co.config);
  c_co->add_option("--csv", co.csv, "CSV output (default stdout)");
  c_co->add_option("--json", co.json_out);
  add_sweep_options(c_co, co.sweep);
  c_co->get_option("--detector")->description("Ignored; set hpge / cebr3 in the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  set_thread_count(threads);
  set_quiet(quiet);
  try {
    if (c_gs->parsed()) return run_gen_synth(gs);
    if (c_sa->parsed()) return run_sample(sa);
    if (c_ta->parsed()) return run_train(ta);
    if (c_ca->parsed()) return run_classify(ca);
    if (c_tc->parsed()) return run_train_cvae(tc);
    if (c_ga->parsed()) return run_generate(ga);
    if (c_ba->parsed()) return run_bench(ba);
    if (c_co->parsed()) return run_compare(co);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::Config ? kExitConfig : kExitRuntime;
  } catch (const json::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
