#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "pgnaa/error.hpp"
#include "pgnaa/io.hpp"
#include "pgnaa/preprocess.hpp"
#include "pgnaa/synth.hpp"

using namespace pgnaa;

namespace {

DetectorProfile grid(std::size_t n, double slope) { return {"grid", n, 1000.0, {slope, 0.0}}; }

std::size_t argmax_in(const CategoricalDistribution& d, std::size_t lo, std::size_t hi) {
  std::size_t best = lo;
  for (std::size_t i = lo; i < hi; ++i)
    if (d[i] > d[best]) best = i;
  return best;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

Spectrum scaled(const CategoricalDistribution& d) {
  std::vector<double> c(d.probs().begin(), d.probs().end());
  for (auto& x : c) x *= 1e6;
  return Spectrum(c);
}

}  // namespace

TEST_CASE("fwhm defaults") {
  CHECK(hpge_response().fwhm(1000) == doctest::Approx(1 + 0.03 * std::sqrt(1000.0)));
  CHECK(cebr3_response().fwhm(1000) == doctest::Approx(20 + 0.9 * std::sqrt(1000.0)));
  CHECK(response_for(cebr3_aluminium_chips()).fwhm_a_kev == 20.0);
  CHECK(response_for(hpge_aluminium_chips()).fwhm_a_kev == 1.0);
}

TEST_CASE("single line renders a single mode") {
  AlloyTemplate t{"one", {{700.0, 1.0}}, {0.0, 0.0}, 0.0};
  auto d = render_expected(t, hpge_response(), grid(2000, 1.0));
  double sum = 0.0;
  for (double p : d.probs()) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(argmax_in(d, 0, 2000) == 700);
  auto peaks = detect_peaks(scaled(d), 1.0, 25);
  CHECK(peaks.size() == 1);
  CHECK(render_expected(t, hpge_response(), grid(2000, 1.0)).probs()[700] == d[700]);
}

TEST_CASE("escape modes appear only above the pair threshold") {
  AlloyTemplate t{"esc", {{2000.0, 1.0}}, {0.0, 0.0}, 0.2};
  auto d = render_expected(t, hpge_response(), grid(2500, 1.0));
  CHECK(argmax_in(d, 1400, 1600) == 1489);
  CHECK(argmax_in(d, 900, 1100) == 978);
  CHECK(d[1489] > 100 * d[1300]);
  CHECK(d[978] > 100 * d[1200]);
  auto peaks = detect_peaks(scaled(d), 1.0, 25);
  CHECK(peaks.size() == 3);

  AlloyTemplate low{"low", {{1000.0, 1.0}}, {0.0, 0.0}, 0.2};
  auto dl = render_expected(low, hpge_response(), grid(2500, 1.0));
  CHECK(detect_peaks(scaled(dl), 1.0, 25).size() == 1);
}

TEST_CASE("template validation") {
  auto prof = grid(1000, 1.0);
  CHECK_THROWS_AS((AlloyTemplate{"x", {{500.0, 0.0}}, {}, 0.1}.validate(prof)), Error);
  CHECK_THROWS_AS((AlloyTemplate{"x", {{5000.0, 1.0}}, {}, 0.1}.validate(prof)), Error);
  CHECK_THROWS_AS((AlloyTemplate{"x", {{500.0, 1.0}}, {-1.0, 0.0}, 0.1}.validate(prof)), Error);
  CHECK_THROWS_AS((AlloyTemplate{"x", {{500.0, 1.0}}, {}, 1.0}.validate(prof)), Error);
  CHECK_NOTHROW((AlloyTemplate{"x", {{500.0, 1.0}}, {}, 0.1}.validate(prof)));
}

TEST_CASE("long-term renders") {
  AlloyTemplate t{"lt", {{400.0, 1.0}, {1500.0, 0.5}}, {0.001, 0.001}, 0.1};
  auto prof = grid(2048, 1.0);
  CHECK_THROWS_AS(render_long_term(t, hpge_response(), prof, 0, 1), Error);
  auto s = render_long_term(t, hpge_response(), prof, 10'000'000, 3);
  CHECK(s.total() == 1e7);
  CHECK(s.is_integral());
  auto expected = render_expected(t, hpge_response(), prof);
  CHECK(total_variation(normalize(s).probs(), expected.probs()) < 0.01);
  CHECK(render_long_term(t, hpge_response(), prof, 1000, 3) == render_long_term(t, hpge_response(), prof, 1000, 3));
  CHECK(default_long_term_counts(hpge_aluminium_chips()) == 7000 * 3600);
}

TEST_CASE("default libraries") {
  for (auto kind : {MaterialKind::AluminiumLike, MaterialKind::CopperLike}) {
    auto temps = default_templates(kind);
    REQUIRE(temps.size() == 5);
    auto prof = kind == MaterialKind::AluminiumLike ? hpge_aluminium_block() : hpge_copper_block();
    std::vector<CategoricalDistribution> dists;
    for (auto& t : temps) {
      CHECK_NOTHROW(t.validate(prof));
      dists.push_back(render_expected(t, response_for(prof), prof));
    }
    for (std::size_t a = 0; a < 5; ++a)
      for (std::size_t b = a + 1; b < 5; ++b) CHECK(total_variation(dists[a].probs(), dists[b].probs()) > 0.0);

    LibraryOptions opt;
    opt.total_counts = 200000;
    opt.seed = 4;
    auto lib = default_library(kind, prof, opt);
    CHECK(lib.size() == 5);
    CHECK(lib.detector.name == prof.name);
    for (auto& e : lib.entries) CHECK(e.long_term.total() == 200000.0);
    CHECK(default_library(kind, prof, opt).entries[2].long_term == lib.entries[2].long_term);
  }
  CHECK(material_kind_from_string("copper-like") == MaterialKind::CopperLike);
  CHECK(to_string(MaterialKind::AluminiumLike) == "aluminium-like");
  CHECK_THROWS_AS(material_kind_from_string("steel"), Error);
}

TEST_CASE("the coarse detector resolves no more peaks than the fine one") {
  auto fine = hpge_aluminium_chips();
  auto coarse = cebr3_aluminium_chips();
  for (auto kind : {MaterialKind::AluminiumLike, MaterialKind::CopperLike})
    for (auto& t : default_templates(kind)) {
      auto pf = detect_peaks(scaled(render_expected(t, response_for(fine), fine)), 100.0, 25);
      auto pc = detect_peaks(scaled(render_expected(t, response_for(coarse), coarse)), 100.0, 25);
      CHECK(pc.size() <= pf.size());
      CHECK(pf.size() > 0);
    }
}

TEST_CASE("template json round trip") {
  auto temps = default_templates(MaterialKind::CopperLike);
  nlohmann::json j{{"material", "copper-like"}, {"templates", nlohmann::json::array()}};
  for (auto& t : temps) j["templates"].push_back(to_json(t));
  auto path = std::filesystem::temp_directory_path() / "pgnaa_templates.json";
  write_json_file(path, j);
  auto back = load_templates(path);
  REQUIRE(back.size() == temps.size());
  for (std::size_t i = 0; i < temps.size(); ++i) {
    CHECK(back[i].label == temps[i].label);
    CHECK(back[i].lines.size() == temps[i].lines.size());
    CHECK(back[i].escape_fraction == temps[i].escape_fraction);
  }
  std::filesystem::remove(path);
}
