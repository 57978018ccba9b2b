#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "driftmon/calibrate.hpp"
#include "driftmon/error.hpp"
#include "driftmon/simgen.hpp"

using namespace driftmon;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

// Replicate r: i.i.d. N(0.5, 0.15^2) pixels on an 8 x 8 constant scene.
ReplicateSource noise_source(std::uint64_t seed) {
  return {[seed](std::uint64_t rep, std::size_t index) {
            Rng rng = Rng(derive_seed(seed, rep)).substream(index);
            ImageFrame f(Dims{8, 8}, static_cast<double>(index + 1));
            for (double& v : f.values()) v = 0.5 + 0.15 * rng.normal();
            return f;
          },
          kUnbounded};
}

ReplicateSource flat_source() {
  return {[](std::uint64_t, std::size_t index) { return ImageFrame(Dims{8, 8}, static_cast<double>(index + 1)); },
          kUnbounded};
}

FitConfig quick_fit() {
  FitConfig f;
  f.n_grid_directions = 16;
  return f;
}

}  // namespace

TEST_SUITE("calibrate") {
  TEST_CASE("first crossing of the CUSUM") {
    const std::vector<double> lam{1.0, 1.5, 1.5, 1.5};
    // n_eff / sqrt 2 = 1: increments -0.25, 0.25, 0.25, 0.25 give Q 0, 0.25, 0.5, 0.75.
    const double n = std::sqrt(2.0);
    CHECK(first_crossing(lam, 0.25, 0.4, n) == std::optional<std::size_t>(3));
    CHECK(first_crossing(lam, 0.25, 0.5, n) == std::optional<std::size_t>(4));
    CHECK_FALSE(first_crossing(lam, 0.25, 0.75, n));
    const auto q = cusum_path(lam, 0.25, n);
    REQUIRE(q.size() == 4);
    CHECK(q[0] == 0.0);
    CHECK(q[3] == 0.75);
  }

  TEST_CASE("run lengths {1,1,1} summarize as 1.000 (0.000)") {
    const ArlEstimate e = summarize_run_lengths({1, 1, 1}, 0);
    CHECK(e.arl == 1.0);
    CHECK(e.sd == 0.0);
    CHECK(e.censored == 0);
  }

  TEST_CASE("a zero limit with no allowance signals almost at once") {
    LambdaPaths paths(noise_source(1), 5, quick_fit(), 0.0225);
    CalibrationConfig cfg;
    cfg.n_replications = 20;
    cfg.arl0 = 10;
    const ArlEstimate e = estimate_arl(paths, 0.0, 0.0, cfg);
    CHECK(e.arl >= 1.0);
    CHECK(e.arl <= 2.5);
  }

  TEST_CASE("an infinite limit censors every run") {
    LambdaPaths paths(noise_source(2), 4, quick_fit(), 0.0225);
    CalibrationConfig cfg;
    cfg.n_replications = 3;
    cfg.arl0 = 1.0;
    cfg.max_run_length = 6;
    const ArlEstimate e = estimate_arl(paths, 0.1, kInf, cfg);
    CHECK(e.censored == 3);
    CHECK(e.arl == 6.0);
  }

  TEST_CASE("a stream that can never signal raises a bracket error") {
    LambdaPaths paths(flat_source(), 4, quick_fit(), 1.0);
    CalibrationConfig cfg;
    cfg.n_replications = 2;
    cfg.arl0 = 3;
    CHECK_THROWS_AS(calibrate_q0(paths, 0.5, cfg), BracketError);
    cfg.q0_bracket = std::make_pair(0.0, 5.0);
    CHECK_THROWS_AS(calibrate_q0(paths, 0.5, cfg), BracketError);
  }

  TEST_CASE("calibration hits a small target and is reproducible") {
    CalibrationConfig cfg;
    cfg.n_replications = 20;
    cfg.arl0 = 6;
    cfg.tolerance = 0.5;
    LambdaPaths a(noise_source(3), 4, quick_fit(), 0.0225);
    const CalibrationResult r = calibrate_q0(a, 0.5, cfg);
    CHECK(std::abs(r.achieved.arl - 6.0) <= 1.0);
    CHECK(r.steps.size() >= 2);
    LambdaPaths b(noise_source(3), 4, quick_fit(), 0.0225);
    CHECK(calibrate_q0(b, 0.5, cfg).q0 == r.q0);
    std::ostringstream csv;
    write_calibration_csv(csv, r.steps);
    CHECK(csv.str().rfind("q0,arl,sd,censored\n", 0) == 0);
  }

  TEST_CASE("more replications leave the shared replicates unchanged") {
    LambdaPaths few(noise_source(4), 4, quick_fit(), 0.0225);
    LambdaPaths many(noise_source(4), 4, quick_fit(), 0.0225);
    few.prepare(3);
    many.prepare(6);
    for (std::uint64_t r = 0; r < 3; ++r) {
      const auto a = few.get(r, 5);
      const auto b = many.get(r, 5);
      CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    }
  }

  TEST_CASE("allowance from bootstrap CUSUM paths") {
    const std::vector<std::vector<double>> ramp{{1, 2, 3, 4, 5}};
    CHECK(kappa_from_paths(ramp, 1, 1, 5) == doctest::Approx(1.0));
    std::vector<std::vector<double>> two(2);
    for (int j = 3; j <= 8; ++j) {
      two[0].push_back(0.5 * j);
      two[1].push_back(1.5 * j);
    }
    CHECK(kappa_from_paths(two, 3, 3, 8) == doctest::Approx(1.0));
    CHECK(kappa_from_paths(two, 3, 5, 6) == doctest::Approx(1.0));
    CHECK_THROWS_AS(kappa_from_paths(two, 3, 2, 6), PreconditionError);
    CHECK_THROWS_AS(kappa_from_paths(two, 3, 4, 9), PreconditionError);
  }

  TEST_CASE("limit from the upper 95% normal quantile") {
    const std::vector<double> same{0.7, 0.7, 0.7};
    CHECK(quantile_q0(same) == doctest::Approx(0.7));
    const std::vector<double> pair{0.0, 2.0};
    CHECK(quantile_q0(pair) == doctest::Approx(3.32617).epsilon(1e-6));
    const std::vector<double> shifted{10.0, 12.0};
    CHECK(quantile_q0(shifted) - quantile_q0(pair) == doctest::Approx(10.0));
  }

  TEST_CASE("bootstrap calibration on a short in-control sequence") {
    ScenarioSpec spec;
    spec.n = 12;
    spec.horizon = 14;
    spec.seed = 5;
    const auto seq = generate_sequence(spec);
    BootstrapConfig cfg;
    cfg.m0 = 6;
    cfg.n_bootstrap = 4;
    cfg.seed = 8;
    const auto r = bootstrap_calibrate(seq, cfg, quick_fit());
    CHECK(r.theta_sq > 0.0);
    CHECK(r.kappa >= 0.0);
    CHECK(std::isfinite(r.q0));
    REQUIRE(r.lambda_paths.size() == 4);
    for (const auto& p : r.lambda_paths) CHECK(p.size() == 8);
    const auto again = bootstrap_calibrate(seq, cfg, quick_fit());
    CHECK(again.kappa == r.kappa);
    CHECK(again.q0 == r.q0);

    const BootstrapConfig res = cfg.resolved(14);
    CHECK(res.j_lo == 7);
    CHECK(res.j_hi == 14);
    BootstrapConfig bad = cfg;
    bad.j_lo = 3;
    CHECK_THROWS_AS(bad.resolved(14), PreconditionError);
    CHECK_THROWS_AS(cfg.resolved(6), PreconditionError);
  }

  TEST_CASE("config validation") {
    CalibrationConfig cfg;
    CHECK(cfg.censor_bound() == 200);
    cfg.arl0 = 0.5;
    CHECK_THROWS_AS(cfg.validate(), PreconditionError);
    cfg = CalibrationConfig{};
    cfg.q0_bracket = std::make_pair(2.0, 1.0);
    CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  }
}
