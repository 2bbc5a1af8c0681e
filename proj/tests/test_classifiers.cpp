#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "pgnaa/classifiers.hpp"
#include "pgnaa/error.hpp"
#include "pgnaa/io.hpp"

using namespace pgnaa;

namespace {

LabeledDataset make_ds(std::vector<std::vector<double>> rows, std::vector<std::string> labels) {
  LabeledDataset ds;
  for (auto& r : rows) ds.spectra.emplace_back(r);
  ds.labels = std::move(labels);
  return ds;
}

double train_accuracy(const Classifier& c, const LabeledDataset& ds) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) ok += c.predict(ds.spectra[i]) == ds.labels[i];
  return 100.0 * static_cast<double>(ok) / static_cast<double>(ds.size());
}

// Multinomial log-pmf of counts c under probabilities p, computed from
// scratch: log n! - sum log c_i! + sum c_i log p_i.
double multinomial_log_pmf(const std::vector<int>& c, const std::vector<double>& p) {
  int n = 0;
  double out = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    n += c[i];
    out -= std::lgamma(c[i] + 1.0);
    if (c[i] > 0) out += c[i] * std::log(p[i]);
  }
  return out + std::lgamma(n + 1.0);
}

// Every count vector over `channels` channels with total <= max_total.
void for_each_spectrum(std::size_t channels, int max_total, auto&& fn) {
  std::vector<int> c(channels, 0);
  auto rec = [&](auto&& self, std::size_t i, int left) -> void {
    if (i == channels) {
      fn(c);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      c[i] = v;
      self(self, i + 1, left - v);
    }
    c[i] = 0;
  };
  rec(rec, 0, max_total);
}

LabeledDataset blobs(std::size_t classes, std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.4);
  LabeledDataset ds;
  for (std::size_t k = 0; k < classes; ++k) {
    const double angle = 2.0 * M_PI * k / classes;
    for (std::size_t j = 0; j < per_class; ++j) {
      ds.spectra.emplace_back(std::vector<double>{5 + 3 * std::cos(angle) + n(rng), 5 + 3 * std::sin(angle) + n(rng)});
      ds.labels.push_back("c" + std::to_string(k));
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("select_best tie-break") {
  CHECK(select_best(std::vector<double>{1, 3, 3}, Polarity::Maximize) == 1);
  CHECK(select_best(std::vector<double>{2, 1, 1}, Polarity::Minimize) == 1);
  CHECK(select_best(std::vector<double>{0, 0, 0}, Polarity::Maximize) == 0);
}

TEST_CASE("mlc log-likelihood examples") {
  auto sym = add_one_log_probs(Spectrum({1, 1}));
  CHECK(sym[0] == doctest::Approx(std::log(0.5)));
  CHECK(mlc_log_likelihood(Spectrum({3, 1}), sym) == doctest::Approx(-2.772589).epsilon(1e-6));
  CHECK(mlc_log_likelihood(Spectrum({0, 0}), sym) == 0.0);
  auto skew = add_one_log_probs(Spectrum({3, 0}));
  CHECK(mlc_log_likelihood(Spectrum({1, 1}), skew) == doctest::Approx(-1.832581).epsilon(1e-6));
  CHECK_THROWS_AS(mlc_log_likelihood(Spectrum({1, 1, 1}), skew), Error);
}

TEST_CASE("mlc score differences match the multinomial oracle") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> cnt(0, 40);
  double worst = 0.0;
  for (std::size_t channels = 1; channels <= 8; ++channels) {
    std::vector<std::vector<double>> refs(3, std::vector<double>(channels));
    for (auto& r : refs)
      for (auto& x : r) x = cnt(rng);
    std::vector<std::vector<double>> lp, probs;
    for (auto& r : refs) {
      lp.push_back(add_one_log_probs(Spectrum(r)));
      double z = 0.0;
      for (double x : r) z += x + 1.0;
      std::vector<double> p;
      for (double x : r) p.push_back((x + 1.0) / z);
      probs.push_back(p);
    }
    for_each_spectrum(channels, 6, [&](const std::vector<int>& c) {
      Spectrum s(std::vector<double>(c.begin(), c.end()));
      for (std::size_t a = 1; a < refs.size(); ++a) {
        const double got = mlc_log_likelihood(s, lp[a]) - mlc_log_likelihood(s, lp[0]);
        const double want = multinomial_log_pmf(c, probs[a]) - multinomial_log_pmf(c, probs[0]);
        worst = std::max(worst, std::abs(got - want));
      }
    });
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("mlc classifier") {
  SUBCASE("mean over references equals mean log-likelihood") {
    auto ds = make_ds({{5, 1, 0}, {3, 3, 0}, {0, 1, 9}}, {"A", "A", "B"});
    MlcClassifier m;
    m.fit(ds);
    Spectrum s({2, 1, 1});
    auto sc = m.predict_scores(s);
    const double a = 0.5 * (mlc_log_likelihood(s, add_one_log_probs(ds.spectra[0])) +
                            mlc_log_likelihood(s, add_one_log_probs(ds.spectra[1])));
    CHECK(sc[0] == doctest::Approx(a).epsilon(1e-12));
    CHECK(m.reference_counts() == std::vector<std::size_t>{2, 1});
    CHECK(m.labels() == std::vector<std::string>{"A", "B"});
  }
  SUBCASE("identical references tie to the first label") {
    MlcClassifier m;
    m.fit(make_ds({{4, 4}, {4, 4}}, {"X", "Y"}));
    CHECK(m.predict(Spectrum({9, 1})) == "X");
  }
  SUBCASE("argmax invariant under integer scaling") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> cnt(0, 30);
    std::vector<std::vector<double>> rows(6, std::vector<double>(20));
    for (auto& r : rows)
      for (auto& x : r) x = cnt(rng);
    MlcClassifier m;
    m.fit(make_ds(rows, {"a", "b", "c", "a", "b", "c"}));
    for (int t = 0; t < 50; ++t) {
      std::vector<double> c(20);
      for (auto& x : c) x = cnt(rng) % 4;
      c[0] += 1;
      const auto base = m.predict_index(Spectrum(c));
      for (int k : {2, 3, 7}) {
        auto ck = c;
        for (auto& x : ck) x *= k;
        CHECK(m.predict_index(Spectrum(ck)) == base);
      }
    }
  }
}

TEST_CASE("mlc_fit on a library") {
  DetectorProfile d{"t", 40, 2000.0, {1.0, 0.0}};
  std::vector<double> a(40, 0.0), b(40, 0.0);
  for (std::size_t i = 0; i < 20; ++i) a[i] = 5000;
  for (std::size_t i = 20; i < 40; ++i) b[i] = 5000;
  AlloyLibrary lib{d, {{"A", Spectrum(a)}, {"B", Spectrum(b)}}};
  MlcFitOptions opt;
  opt.config.n_refs = 7;
  opt.config.ref_time_s = 10.0;
  auto m = mlc_fit(lib, opt);
  CHECK(m.reference_counts() == std::vector<std::size_t>{7, 7});
  for (auto& v : m.mean_log_probs())
    for (double x : v) CHECK(std::isfinite(x));
  auto s = sample_short(normalize(lib.entries[0].long_term), {1.0, 2000.0, 5});
  CHECK(m.predict(s) == "A");

  // A single reference equal to the long-term spectrum is classical MLC.
  MlcClassifier single;
  single.fit(make_ds({a, b}, {"A", "B"}));
  auto want = add_one_log_probs(Spectrum(a));
  CHECK(single.mean_log_probs()[0] == want);
}

TEST_CASE("kuiper statistic") {
  CategoricalDistribution p({1.0, 0.0}), q({0.0, 1.0});
  CHECK(kuiper_statistic(p, q) == doctest::Approx(1.0));
  CHECK(kuiper_statistic(p, p) == 0.0);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(30), y(30);
    for (auto& v : x) v = u(rng) * (u(rng) < 0.3 ? 0.0 : 1.0) + 1e-3;
    for (auto& v : y) v = u(rng);
    auto P = normalize(Spectrum(x)), Q = normalize(Spectrum(y));
    const double v = kuiper_statistic(P, Q);
    CHECK(v >= 0.0);
    CHECK(v <= 2.0);
    CHECK(v == doctest::Approx(kuiper_statistic(Q, P)).epsilon(1e-12));
  }
}

TEST_CASE("kuiper classifier") {
  DetectorProfile d{"t", 64, 1.0, {1.0, 0.0}};
  std::vector<double> a(64), b(64);
  for (std::size_t i = 0; i < 64; ++i) {
    a[i] = 100 + 50 * std::sin(i * 0.2);
    b[i] = 100 + 50 * std::cos(i * 0.2);
  }
  AlloyLibrary lib{d, {{"A", Spectrum(a)}, {"B", Spectrum(b)}}};
  KuiperClassifier k;
  k.fit_library(lib);
  CHECK(k.polarity() == Polarity::Minimize);
  CHECK(k.predict(sample_short(normalize(Spectrum(a)), {1.0, 1e6, 1})) == "A");
  CHECK(k.predict(Spectrum(b)) == "B");
  CHECK(k.predict_scores(Spectrum(b))[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(k.predict_scores(Spectrum(std::vector<double>(64, 0.0))), Error);

  AlloyLibrary same{d, {{"A", Spectrum(a)}, {"B", Spectrum(a)}}};
  KuiperClassifier k2;
  k2.fit_library(same);
  CHECK(k2.predict(Spectrum(b)) == "A");
}

TEST_CASE("knn") {
  auto ds = make_ds({{0, 1}, {1, 0}, {5, 5}, {6, 6}}, {"A", "A", "B", "B"});
  KnnClassifier k3({3});
  k3.fit(ds);
  CHECK(k3.predict(Spectrum({0, 0})) == "A");

  KnnClassifier k1({1});
  k1.fit(ds);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(k1.predict(ds.spectra[i]) == ds.labels[i]);

  KnnClassifier big({8000});
  big.fit(ds);
  CHECK(big.effective_k() == 4);

  // Permuting the training rows does not change predictions.
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cnt(0, 9);
  LabeledDataset many;
  for (int i = 0; i < 40; ++i) {
    many.spectra.emplace_back(std::vector<double>{double(cnt(rng)), double(cnt(rng)), double(cnt(rng))});
    many.labels.push_back(i % 3 == 0 ? "x" : (i % 3 == 1 ? "y" : "z"));
  }
  std::vector<std::size_t> order(40);
  std::iota(order.begin(), order.end(), 0);
  KnnClassifier base({5});
  base.fit(many);
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(order.begin(), order.end(), rng);
    LabeledDataset perm;
    // Label indices follow first appearance, so the first row of each label stays in front.
    for (std::size_t i = 0; i < 3; ++i) {
      perm.spectra.push_back(many.spectra[i]);
      perm.labels.push_back(many.labels[i]);
    }
    for (auto i : order)
      if (i >= 3) {
        perm.spectra.push_back(many.spectra[i]);
        perm.labels.push_back(many.labels[i]);
      }
    KnnClassifier p({5});
    p.fit(perm);
    for (int t = 0; t < 30; ++t) {
      Spectrum q(std::vector<double>{double(cnt(rng)), double(cnt(rng)), double(cnt(rng))});
      CHECK(p.predict(q) == base.predict(q));
    }
  }
}

TEST_CASE("radius neighbours") {
  auto ds = make_ds({{0, 1}, {1, 0}, {5, 5}, {6, 6}, {7, 7}}, {"A", "A", "B", "B", "B"});
  RncClassifier tiny({0.01});
  tiny.fit(ds);
  CHECK(tiny.predict(Spectrum({0, 0})) == "B");
  RncClassifier r({2.0});
  r.fit(ds);
  CHECK(r.predict(Spectrum({0, 0})) == "A");
  CHECK(r.predict(Spectrum({6, 6})) == "B");
}

TEST_CASE("logistic regression") {
  auto two = make_ds({{0}, {10}}, {"A", "B"});
  LogisticOvrClassifier lr;
  lr.fit(two);
  CHECK(train_accuracy(lr, two) == 100.0);

  LogisticParams none;
  none.max_iter = 0;
  LogisticOvrClassifier zero(none);
  zero.fit(two);
  auto sc = zero.predict_scores(Spectrum({10}));
  CHECK(sc[0] == sc[1]);
  CHECK(zero.predict(Spectrum({10})) == "A");

  auto b3 = blobs(3, 30, 2);
  LogisticParams p;
  p.max_iter = 2000;
  LogisticOvrClassifier m(p);
  m.fit(b3);
  CHECK(train_accuracy(m, b3) == 100.0);
  for (double g : m.final_gradient_norms()) CHECK(g < 1e-4);

  CHECK_THROWS_AS(LogisticOvrClassifier().fit(make_ds({{1}, {2}}, {"A", "A"})), Error);
  CHECK_THROWS_AS(LogisticOvrClassifier().fit(LabeledDataset{}), Error);
}

TEST_CASE("linear decision functions under input doubling") {
  auto b3 = blobs(3, 20, 6);
  LogisticParams p;
  p.max_iter = 500;
  LogisticOvrClassifier m(p);
  m.fit(b3);
  for (std::size_t i = 0; i < b3.size(); ++i) {
    auto x = b3.spectra[i];
    std::vector<double> dbl(x.counts().begin(), x.counts().end());
    for (auto& v : dbl) v *= 2;
    auto s1 = m.predict_scores(x), s2 = m.predict_scores(Spectrum(dbl));
    for (std::size_t c = 0; c < s1.size(); ++c) {
      const double b = m.intercepts()[c];
      CHECK(s2[c] - b == doctest::Approx(2 * (s1[c] - b)).epsilon(1e-9));
    }
  }
  CHECK(train_accuracy(m, b3) == 100.0);
}

TEST_CASE("linear svm") {
  auto two = make_ds({{0}, {10}}, {"A", "B"});
  LinearSvmOvrClassifier svm;
  svm.fit(two);
  CHECK(train_accuracy(svm, two) == 100.0);

  auto b3 = blobs(3, 30, 4);
  LinearSvmOvrClassifier s3;
  s3.fit(b3);
  CHECK(train_accuracy(s3, b3) == 100.0);

  SvmParams tiny;
  tiny.C = 1e-9;
  LinearSvmOvrClassifier flat(tiny);
  flat.fit(two);
  for (auto& w : flat.weights())
    for (double x : w) CHECK(std::abs(x) < 1e-6);
  CHECK(flat.predict(Spectrum({10})) == "A");

  // Margin constraints on a separable 2D fixture.
  auto m2 = make_ds({{10, 10}, {0, 0}}, {"P", "N"});
  SvmParams tight;
  tight.tol = 1e-12;
  tight.max_iter = 1000;
  LinearSvmOvrClassifier ms(tight);
  ms.fit(m2);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 2; ++i) {
      const double y = (i == c) ? 1.0 : -1.0;
      CHECK(y * ms.predict_scores(m2.spectra[i])[c] >= 1.0 - 1e-2);
    }
}

TEST_CASE("factory and persistence") {
  auto dir = std::filesystem::temp_directory_path() / "pgnaa_classifier_persist";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto b3 = blobs(3, 15, 9);
  save_dataset(dir / "train", b3);
  auto probe = blobs(3, 5, 10);
  for (std::string kind : {"mlc", "kuiper", "knn", "rnc", "lr", "svm"}) {
    ClassifierSpec spec;
    spec.kind = kind;
    spec.knn.k = 5;
    spec.rnc.radius = 2.0;
    auto spec2 = classifier_spec_from_json(to_json(spec));
    CHECK(spec2.kind == kind);
    auto c = make_classifier(spec2);
    c->fit(b3);
    if (auto* nb = dynamic_cast<NeighborsBase*>(c.get())) nb->set_training_manifest(dir / "train");
    save_classifier(*c, dir / (kind + ".json"));
    auto back = load_classifier(dir / (kind + ".json"));
    CHECK(back->kind() == kind);
    CHECK(back->labels() == c->labels());
    for (auto& s : probe.spectra) {
      CHECK(back->predict(s) == c->predict(s));
      CHECK(back->predict(s) == c->predict(s));
    }
  }
  ClassifierSpec bad;
  bad.kind = "forest";
  CHECK_THROWS_AS(make_classifier(bad), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("unfitted classifiers refuse to predict") {
  MlcClassifier m;
  CHECK_THROWS_AS(m.predict(Spectrum({1, 1})), Error);
}
