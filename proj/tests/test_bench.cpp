#include <doctest.h>

#include <cmath>

#include "pgnaa/bench.hpp"
#include "pgnaa/error.hpp"

using namespace pgnaa;
using nlohmann::json;

namespace {

ExperimentConfig small_config() {
  return experiment_config_from_json(json::parse(R"({
    "library": {"synthetic": "aluminium-like", "seed": 3},
    "detector": "hpge-al-block",
    "classifiers": [{"kind": "mlc", "n_refs": 10, "ref_time_s": 60}, "kuiper"],
    "times": [0.5, 1.0, 2.0],
    "n_train": 10, "n_test": 40, "repeats": 2, "seed": 11
  })"));
}

}  // namespace

TEST_CASE("accuracy") {
  std::vector<std::string> y{"a", "b", "a", "c"};
  CHECK(accuracy(y, y) == 100.0);
  CHECK(accuracy({"b", "a", "b", "a"}, y) == 0.0);
  CHECK(accuracy({"a", "b", "a", "a"}, y) == 75.0);
  CHECK_THROWS_AS(accuracy({}, {}), Error);
  CHECK_THROWS_AS(accuracy({"a"}, y), Error);
}

TEST_CASE("config validation") {
  auto bad = [](const char* text) {
    try {
      experiment_config_from_json(json::parse(text));
    } catch (const Error& e) {
      return e.code() == ErrorCode::Config;
    }
    return false;
  };
  CHECK(bad(R"({"repeats": 0})"));
  CHECK(bad(R"({"times": []})"));
  CHECK(bad(R"({"times": [1, 1]})"));
  CHECK(bad(R"({"times": [2, 1]})"));
  CHECK(bad(R"({"classifiers": []})"));
  CHECK(bad(R"({"classifiers": ["forest"]})"));
  CHECK(bad(R"({"generator": "gan"})"));
  CHECK(bad(R"({"detector": "nai"})"));

  ExperimentConfig d;
  CHECK(d.repeats == 5);
  CHECK(d.n_train == 2000);
  CHECK(d.n_test == 1000);
  CHECK(d.times == std::vector<double>{0.2, 0.5, 1.0, 2.0, 5.0, 10.0});
}

TEST_CASE("config json round trip") {
  auto cfg = small_config();
  cfg.preprocessing.subset_channels = 4000;
  cfg.preprocessing.escape_peak_weighting = BandWeighting{};
  auto back = experiment_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK(back.classifiers.size() == 2);
  CHECK(back.classifiers[0].mlc.n_refs == 10);
  CHECK(*back.preprocessing.subset_channels == 4000);
  CHECK(to_json(cfg)["test_sets"] == "resampled per repeat");
}

TEST_CASE("repeat seeds differ") {
  CHECK(repeat_seed(5, 0) != repeat_seed(5, 1));
  CHECK(repeat_seed(5, 3) == repeat_seed(5, 3));
}

TEST_CASE("time sweep shape, trend and determinism") {
  auto cfg = small_config();
  auto a = run_time_sweep(cfg);
  REQUIRE(a.rows.size() == 6);
  CHECK_FALSE(a.has_failures());
  for (auto& row : a.rows) {
    CHECK(row.accuracies.size() == 2);
    CHECK(row.accuracy_mean >= 0.0);
    CHECK(row.accuracy_mean <= 100.0);
    CHECK(row.accuracy_mean == doctest::Approx((row.accuracies[0] + row.accuracies[1]) / 2));
    CHECK(row.material == "aluminium-like");
  }
  CHECK(a.rows[0].classifier == "kuiper");
  CHECK(a.rows[3].classifier == "mlc");
  int inversions = 0;
  for (std::size_t t = 1; t < 3; ++t) {
    const double prev = a.find("mlc", cfg.times[t - 1])->accuracy_mean;
    const double cur = a.find("mlc", cfg.times[t])->accuracy_mean;
    if (cur < prev) {
      ++inversions;
      CHECK(prev - cur <= 0.5);
    }
  }
  CHECK(inversions <= 1);

  auto b = run_time_sweep(cfg);
  for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].accuracies == b.rows[i].accuracies);

  auto csv = to_csv(a);
  CHECK(csv.rfind("classifier,material,time_s,accuracy_mean,acc_r1,acc_r2,fit_ms,predict_ms\n", 0) == 0);
  auto j = to_json(a);
  CHECK(j["rows"].size() == 6);
}

TEST_CASE("five repeats and a single-alloy library") {
  auto cfg = small_config();
  cfg.repeats = 5;
  cfg.times = {0.2};
  cfg.classifiers = {classifier_spec_from_json(json::parse(R"({"kind": "mlc", "n_refs": 3, "ref_time_s": 30})"))};
  cfg.n_test = 5;
  auto lib = load_or_render(cfg.library, cfg.detector);
  auto t = run_time_sweep(cfg, lib);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0].accuracies.size() == 5);

  AlloyLibrary one{lib.detector, {lib.entries[0]}};
  cfg.times = {0.2, 1.0};
  auto single = run_time_sweep(cfg, one);
  for (auto& row : single.rows) CHECK(row.accuracy_mean == 100.0);
}

TEST_CASE("failing repeats are isolated") {
  auto cfg = small_config();
  cfg.classifiers = {classifier_spec_from_json("lr"), classifier_spec_from_json("kuiper")};
  cfg.times = {0.5};
  auto lib = load_or_render(cfg.library, cfg.detector);
  AlloyLibrary one{lib.detector, {lib.entries[0]}};
  auto t = run_time_sweep(cfg, one);
  CHECK(t.has_failures());
  const auto* lr = t.find("lr", 0.5);
  REQUIRE(lr);
  CHECK(std::isnan(lr->accuracy_mean));
  CHECK(lr->errors.size() == 2);
  CHECK(t.find("kuiper", 0.5)->accuracy_mean == 100.0);
  CHECK(to_csv(t).find("nan") != std::string::npos);
}

TEST_CASE("preprocessing chain") {
  DetectorProfile d{"t", 12, 100.0, {1.0, 0.0}};
  std::vector<double> a(12, 1.0), b(12, 1.0);
  a[2] = 50;
  b[9] = 50;
  AlloyLibrary lib{d, {{"A", Spectrum(a)}, {"B", Spectrum(b)}}};
  PreprocessChain chain;
  chain.subset_channels = 10;
  chain.rebin_factor = 2;
  chain.unique_peak_weighting = BandWeighting{0, 3.0};
  chain.peak_params = {1, 5.0};
  Preprocessor pre(lib, chain);
  CHECK(pre.profile().n_channels == 5);
  auto out = pre(Spectrum(a));
  CHECK(out.size() == 5);
  // channels (2,3) -> bin 1 carries A's unique peak; (8,9) -> bin 4 carries B's.
  CHECK(pre.channel_weights() == std::vector<double>{1, 3, 1, 1, 3});
  CHECK(out[1] == 3.0 * 51.0);
  CHECK(out[0] == 2.0);
}

TEST_CASE("detector comparison") {
  ResultTable h, c;
  h.rows = {{"mlc", "m", 0.2, 60, {60}, 0, 0, {}}, {"mlc", "m", 1.0, 95, {95}, 0, 0, {}}};
  c.rows = {{"mlc", "m", 0.2, 70, {70}, 0, 0, {}}, {"mlc", "m", 1.0, 90, {90}, 0, 0, {}}};
  auto cmp = join_detector_results(h, c);
  REQUIRE(cmp.rows.size() == 2);
  CHECK(cmp.rows[0].cebr3_mean == 70);
  REQUIRE(cmp.crossover.size() == 1);
  CHECK(*cmp.crossover[0].second == 1.0);
  CHECK(to_csv(cmp).find("mlc") != std::string::npos);

  ResultTable other;
  other.rows = {{"mlc", "m", 0.5, 70, {70}, 0, 0, {}}, {"mlc", "m", 1.0, 90, {90}, 0, 0, {}}};
  try {
    join_detector_results(h, other);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MismatchedTimeGrids);
  }

  // Identical profiles give a crossover at the first grid point.
  auto cfg = small_config();
  cfg.classifiers = {classifier_spec_from_json("kuiper")};
  cfg.times = {0.5, 1.0};
  auto same = compare_detectors(cfg, cfg);
  CHECK(*same.crossover[0].second == 0.5);
  for (auto& row : same.rows) CHECK(row.hpge_mean == row.cebr3_mean);
}

TEST_CASE("cvae generator sweep") {
  auto cfg = experiment_config_from_json(json::parse(R"({
    "library": {"synthetic": "copper-like", "seed": 1, "long_term_counts": 2000000},
    "detector": {"base": "cebr3-al-chips", "name": "cebr3-small", "n_channels": 2048},
    "generator": "cvae",
    "classifiers": [{"kind": "mlc", "n_refs": 20}, "knn"],
    "cvae": {"train_per_alloy": 20, "hidden": 16, "latent": 2, "epochs": 20, "batch_size": 10, "noise_sigma": 0.02},
    "preprocessing": {"rebin": 4},
    "times": [2.0], "n_train": 20, "n_test": 20, "repeats": 1, "seed": 2
  })"));
  auto t = run_time_sweep(cfg);
  CHECK_FALSE(t.has_failures());
  for (auto& row : t.rows) CHECK(row.accuracy_mean > 20.0);
}
