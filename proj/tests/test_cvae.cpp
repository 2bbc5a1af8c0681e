#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "pgnaa/classifiers.hpp"
#include "pgnaa/cvae.hpp"
#include "pgnaa/error.hpp"

using namespace pgnaa;

namespace {

double max_relative_gradient_error(CvaeModel& model, const std::vector<std::vector<double>>& batch,
                                   const std::vector<std::size_t>& labels, double beta,
                                   const std::vector<double>& noise) {
  auto analytic = elbo_loss(model, batch, labels, beta, noise).gradients;
  auto p = model.params();
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    const double h = 1e-6 * std::max(1.0, std::abs(keep));
    p[i] = keep + h;
    const double up = elbo_loss(model, batch, labels, beta, noise).loss;
    p[i] = keep - h;
    const double down = elbo_loss(model, batch, labels, beta, noise).loss;
    p[i] = keep;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

LabeledDataset two_class_dataset(std::size_t n_per, std::size_t channels, std::uint64_t seed) {
  LabeledDataset ds;
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> lo(5.0), hi(40.0);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < n_per; ++j) {
      std::vector<double> c(channels);
      for (std::size_t i = 0; i < channels; ++i) {
        const bool strong = (k == 0) ? i < channels / 2 : i >= channels / 2;
        c[i] = strong ? hi(rng) : lo(rng);
      }
      ds.spectra.emplace_back(c);
      ds.labels.push_back(k == 0 ? "A" : "B");
    }
  return ds;
}

}  // namespace

TEST_CASE("minmax scaler") {
  std::vector<std::vector<double>> rows;
  for (int v = 0; v <= 10; ++v) rows.push_back({double(v), 3.0});
  auto sc = MinMaxScaler::fit(rows);
  for (int v = 0; v <= 10; ++v) {
    auto t = sc.transform(rows[v]);
    CHECK(t[0] == doctest::Approx(v / 10.0));
    CHECK(t[1] == 0.0);
    CHECK(sc.inverse(t)[1] == 3.0);
  }
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-50.0, 300.0);
  std::vector<std::vector<double>> r(40, std::vector<double>(17));
  for (auto& row : r)
    for (auto& x : row) x = u(rng);
  auto s2 = MinMaxScaler::fit(r);
  double worst = 0.0;
  for (auto& row : r) {
    auto back = s2.inverse(s2.transform(row));
    for (std::size_t i = 0; i < row.size(); ++i) worst = std::max(worst, std::abs(back[i] - row[i]));
  }
  CHECK(worst < 1e-9);
  CHECK_THROWS_AS(MinMaxScaler::fit(std::vector<std::vector<double>>{}), Error);
}

TEST_CASE("kl term") {
  std::vector<double> zero(4, 0.0);
  CHECK(kl_standard_normal(zero, zero) == 0.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  bool all_nonneg = true;
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> mu{n(rng), n(rng)}, lv{n(rng), n(rng)};
    all_nonneg &= kl_standard_normal(mu, lv) >= 0.0;
  }
  CHECK(all_nonneg);
  CHECK(kl_standard_normal(std::vector<double>{0.1}, std::vector<double>{0.0}) > 0.0);
  CHECK(kl_standard_normal(std::vector<double>{0.0}, std::vector<double>{0.1}) > 0.0);
}

TEST_CASE("default beta is input over latent") {
  CHECK(default_beta({16384, 100, 10, 5}) == 1638.4);
  CHECK(default_beta({8, 5, 2, 2}) == 4.0);
}

TEST_CASE("layout covers the parameter vector") {
  CvaeShape shape{8, 5, 2, 2};
  CvaeLayout layout(shape);
  std::size_t total = 0;
  for (auto& b : layout.blocks()) {
    CHECK(b.offset == total);
    total += b.size();
  }
  CHECK(total == layout.total);
  CHECK(layout.enc_w.cols == 10);
  CHECK(layout.dec_w.cols == 4);
  CHECK(layout.out_w.rows == 8);
}

TEST_CASE("zero posterior and perfect reconstruction give zero loss") {
  CvaeModel model({6, 4, 3, 2}, {"A", "B"}, 1);
  for (auto& p : model.params()) p = 0.0;
  std::vector<std::vector<double>> batch(2, std::vector<double>(6, 0.5));
  std::vector<std::size_t> labels{0, 1};
  std::vector<double> noise{0.3, -1.0, 2.0, 0.1, 0.5, -0.7};
  auto r = elbo_loss(model, batch, labels, 2.0, noise);
  CHECK(r.kl == 0.0);
  CHECK(r.reconstruction == 0.0);
  CHECK(r.loss == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
  CvaeModel model({8, 5, 2, 2}, {"A", "B"}, 123);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 0.3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& p : model.params()) p += n(rng);
  std::vector<std::vector<double>> batch(4, std::vector<double>(8));
  for (auto& row : batch)
    for (auto& x : row) x = u(rng);
  std::vector<std::size_t> labels{0, 1, 1, 0};
  std::vector<double> noise(4 * 2);
  for (auto& e : noise) e = n(rng) / 0.3;
  CHECK(max_relative_gradient_error(model, batch, labels, default_beta(model.shape()), noise) < 1e-3);
  CHECK(max_relative_gradient_error(model, batch, labels, 0.0, noise) < 1e-3);
}

TEST_CASE("adam") {
  AdamConfig cfg;
  for (double g : {3.0, -0.02, 1e4}) {
    std::vector<double> p{1.0};
    AdamState st(1);
    adam_step(p, std::vector<double>{g}, st, cfg);
    CHECK(st.t == 1);
    const double want = 1.0 - cfg.learning_rate * (g > 0 ? 1 : -1);
    CHECK(std::abs(p[0] - want) <= cfg.learning_rate * cfg.epsilon / std::abs(g) + 1e-15);
  }
  std::vector<double> p{1.0, -2.0};
  AdamState st(2);
  adam_step(p, std::vector<double>{0.0, 0.0}, st, cfg);
  CHECK(p == std::vector<double>{1.0, -2.0});

  std::vector<double> x{5.0};
  AdamState sx(1);
  AdamConfig fast;
  fast.learning_rate = 0.1;
  for (int i = 0; i < 500; ++i) adam_step(x, std::vector<double>{2 * x[0]}, sx, fast);
  CHECK(std::abs(x[0]) < 1e-2);
}

TEST_CASE("training reduces the loss and is deterministic") {
  auto ds = two_class_dataset(40, 32, 4);
  CvaeTrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 16;
  cfg.seed = 3;
  CvaeModel a({32, 16, 3, 2}, {"A", "B"}, 1);
  auto ha = train(a, ds, cfg);
  REQUIRE(ha.epoch_loss.size() == 100);
  CHECK(ha.epoch_loss.back() < ha.epoch_loss.front());
  CHECK(ha.steps == 100 * 5);

  CvaeModel b({32, 16, 3, 2}, {"A", "B"}, 1);
  auto hb = train(b, ds, cfg);
  CHECK(ha.epoch_loss == hb.epoch_loss);
  CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
}

TEST_CASE("zero epochs leave the model unchanged") {
  auto ds = two_class_dataset(5, 8, 1);
  CvaeModel m({8, 4, 2, 2}, {"A", "B"}, 7);
  std::vector<double> before(m.params().begin(), m.params().end());
  CvaeTrainConfig cfg;
  cfg.epochs = 0;
  auto h = train(m, ds, cfg);
  CHECK(h.epoch_loss.empty());
  CHECK(std::equal(before.begin(), before.end(), m.params().begin()));
}

TEST_CASE("generate") {
  auto ds = two_class_dataset(60, 16, 8);
  CvaeModel m({16, 24, 2, 2}, {"A", "B"}, 2);
  CvaeTrainConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 16;
  cfg.beta = 1.0;
  cfg.adam.learning_rate = 0.005;
  train(m, ds, cfg);

  CHECK(generate(m, "A", 0, 1).empty());
  CHECK_THROWS_AS(generate(m, "Z", 1, 1), Error);

  std::vector<double> z{0.4, -1.2}, out(16);
  m.decode(z, 1, out);
  for (double v : out) CHECK((v >= 0.0 && v <= 1.0));

  auto g1 = generate(m, "B", 5, 11);
  auto g2 = generate(m, "B", 5, 11);
  CHECK(g1.spectra == g2.spectra);
  CHECK(g1.labels == std::vector<std::string>(5, "B"));
  for (auto& s : g1.spectra)
    for (double c : s.counts()) CHECK(c >= 0.0);

  // MLC fitted on generated spectra separates sampled held-out spectra.
  LabeledDataset gen;
  for (const char* lab : {"A", "B"}) {
    auto g = generate(m, lab, 30, 5, {0.05});
    gen.spectra.insert(gen.spectra.end(), g.spectra.begin(), g.spectra.end());
    gen.labels.insert(gen.labels.end(), g.labels.begin(), g.labels.end());
  }
  MlcClassifier mlc;
  mlc.fit(gen);
  auto test = two_class_dataset(50, 16, 99);
  int correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) correct += mlc.predict(test.spectra[i]) == test.labels[i];
  CHECK(correct >= 90);
}

TEST_CASE("model file round trip") {
  auto ds = two_class_dataset(10, 8, 3);
  CvaeModel m({8, 4, 2, 2}, {"A", "B"}, 7);
  CvaeTrainConfig cfg;
  cfg.epochs = 3;
  train(m, ds, cfg);
  auto path = std::filesystem::temp_directory_path() / "pgnaa_cvae_roundtrip.json";
  save_cvae(m, path);
  auto back = load_cvae(path);
  CHECK(back.shape() == m.shape());
  CHECK(back.labels() == m.labels());
  CHECK(std::equal(m.params().begin(), m.params().end(), back.params().begin()));
  CHECK(back.scaler().min() == m.scaler().min());
  CHECK(generate(back, "A", 3, 4).spectra == generate(m, "A", 3, 4).spectra);
  std::filesystem::remove(path);
}
