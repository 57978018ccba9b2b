#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "driftmon/error.hpp"
#include "driftmon/simgen.hpp"
#include "driftmon/stats.hpp"

using namespace driftmon;

TEST_SUITE("simgen") {
  TEST_CASE("displayed intensities") {
    ScenarioSpec s1;
    CHECK(true_intensity(s1, 1.0 / 128, 0.3, 0.0) == 1.0);
    s1.regime = Regime::OC;
    CHECK(true_intensity(s1, 50.0 / 128, 0.3, 30.0) == 0.0);
    CHECK(true_intensity(s1, 50.0 / 128, 0.3, 20.0) == 1.0);

    ScenarioSpec s5;
    s5.scenario = Scenario::S5;
    CHECK(true_intensity(s5, 0.5, 0.5, 0.0) == 0.0);
    CHECK(true_intensity(s5, 0.95, 0.5, 0.0) == 1.0);
    CHECK(true_intensity(s5, 0.5, 0.5, 10.0) == doctest::Approx(0.05));

    ScenarioSpec s4;
    s4.scenario = Scenario::S4;
    CHECK(true_intensity(s4, 0.5, 0.5, 5.0) == 0.0);
    CHECK(true_intensity(s4, 0.1, 0.5, 5.0) == 1.0);
    s4.regime = Regime::OC;
    CHECK(true_intensity(s4, 0.24, 0.5, 25.0) == 0.0);
  }

  TEST_CASE("noiseless frames equal the true intensity") {
    for (auto sc : {Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4, Scenario::S5}) {
      ScenarioSpec spec;
      spec.scenario = sc;
      spec.n = 16;
      spec.sigma = 0.0;
      spec.horizon = 3;
      const auto seq = generate_sequence(spec);
      REQUIRE(seq.size() == 3);
      for (const auto& f : seq)
        for (std::size_t r = 0; r < 16; ++r)
          for (std::size_t c = 0; c < 16; ++c) CHECK(f.at(c, r) == true_intensity(spec, f.x(c), f.y(r), f.time()));
    }
  }

  TEST_CASE("in-control and out-of-control streams agree up to the change") {
    for (auto sc : {Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4, Scenario::S5}) {
      ScenarioSpec ic;
      ic.scenario = sc;
      ic.n = 32;
      ic.horizon = 24;
      ic.seed = 99;
      ScenarioSpec oc = ic;
      oc.regime = Regime::OC;
      const auto a = generate_sequence(ic);
      const auto b = generate_sequence(oc);
      for (std::size_t k = 0; k < 20; ++k) {
        const auto va = a[k].values();
        const auto vb = b[k].values();
        CHECK(std::equal(va.begin(), va.end(), vb.begin()));
      }
      bool differs = false;
      for (std::size_t k = 20; k < 24; ++k)
        for (std::size_t i = 0; i < a[k].size(); ++i) differs = differs || a[k].values()[i] != b[k].values()[i];
      CHECK(differs);
    }
  }

  TEST_CASE("noise has the requested spread") {
    ScenarioSpec spec;
    spec.horizon = 1;
    spec.seed = 17;
    const auto seq = generate_sequence(spec);
    std::vector<double> e;
    const auto& f = seq[0];
    for (std::size_t r = 0; r < f.ny(); ++r)
      for (std::size_t c = 0; c < f.nx(); ++c) e.push_back(f.at(c, r) - true_intensity(spec, f.x(c), f.y(r), f.time()));
    CHECK(sample_sd(e) >= 0.148);
    CHECK(sample_sd(e) <= 0.152);
  }

  TEST_CASE("frames are addressable individually") {
    ScenarioSpec spec;
    spec.n = 8;
    spec.horizon = 5;
    spec.seed = 3;
    const auto seq = generate_sequence(spec);
    const ImageFrame f = generate_frame(spec, 3);
    CHECK(f.time() == 4.0);
    const auto a = f.values();
    const auto b = seq[3].values();
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }

  TEST_CASE("names and validation") {
    CHECK(parse_scenario("S3") == Scenario::S3);
    CHECK(parse_regime("oc") == Regime::OC);
    CHECK(to_string(Scenario::S5) == "s5");
    CHECK_THROWS_AS(parse_scenario("s6"), PreconditionError);
    CHECK_THROWS_AS(parse_regime("maybe"), PreconditionError);
    CHECK(default_kappa(Scenario::S1) == 0.9);
    CHECK(default_kappa(Scenario::S4) == 2.0);
    ScenarioSpec bad;
    bad.sigma = -1;
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
  }
}
