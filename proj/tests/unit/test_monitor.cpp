#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "../common/oracles.hpp"
#include "driftmon/error.hpp"
#include "driftmon/monitor.hpp"
#include "driftmon/simgen.hpp"

using namespace driftmon;

TEST_SUITE("monitor") {
  TEST_CASE("lambda of a perfect prediction is zero") {
    const ImageFrame f(Dims{2, 2}, 1.0, {0.3, 0.1, 0.4, 0.1});
    CHECK(lambda_stat(f, f, 1, 0.5) == 0.0);
  }

  TEST_CASE("lambda is RSS over (pixels - K) theta^2") {
    const ImageFrame obs(Dims{2, 2}, 1.0, {0.6, 0.4, 0.6, 0.4});
    const ImageFrame den(Dims{2, 2}, 1.0, {0.5, 0.5, 0.5, 0.5});
    CHECK(lambda_stat(obs, den, 1, 0.01) == doctest::Approx(4.0 / 3.0));
    const ImageFrame scaled(Dims{2, 2}, 1.0, {0.8, 0.2, 0.8, 0.2});
    CHECK(lambda_stat(scaled, den, 1, 0.01) == doctest::Approx(9.0 * 4.0 / 3.0));
    CHECK_THROWS_AS(lambda_stat(obs, den, 4, 0.01), DegenerateDofError);
    CHECK_THROWS_AS(lambda_stat(obs, den, 1, 0.0), PreconditionError);
  }

  TEST_CASE("CUSUM recursion") {
    MonitorState s;
    s.kappa = 0.9;
    s.Q = 2.0;
    cusum_update(s, 1.02, 128.0, 5, 5.0);
    CHECK(s.history.back().increment == doctest::Approx(128.0 / std::sqrt(2.0) * 0.02 - 0.9));
    CHECK(s.Q == doctest::Approx(2.91019).epsilon(1e-5));
    CHECK_FALSE(s.signaled);

    MonitorState z;
    z.kappa = 0.3;
    cusum_update(z, 1.0, 64.0);
    CHECK(z.Q == 0.0);
    MonitorState flat;
    for (int i = 0; i < 50; ++i) cusum_update(flat, 1.0, 64.0);
    CHECK(flat.Q == 0.0);

    MonitorState sig;
    sig.q0 = 1.0;
    cusum_update(sig, 1.2, 64.0);
    CHECK(sig.signaled);
    CHECK(sig.history.back().signal);
    CHECK(sig.history.back().Q > sig.q0);
  }

  TEST_CASE("effective side is the geometric mean of the frame sides") {
    CHECK(effective_side(Dims{64, 64}) == 64.0);
    CHECK(effective_side(Dims{32, 128}) == doctest::Approx(64.0));
  }

  TEST_CASE("noise level on a pure-noise constant scene is close to sigma^2") {
    int inside = 0;
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
      ImageSequence seq;
      Rng rng(derive_seed(31, rep));
      for (int k = 1; k <= 12; ++k) {
        ImageFrame f(Dims{64, 64}, k);
        for (double& v : f.values()) v = 0.5 + 0.15 * rng.normal();
        seq.push_back(f);
      }
      const double th = estimate_theta_sq(seq, 10, FitConfig{});
      if (th >= 0.018 && th <= 0.027) ++inside;
    }
    CHECK(inside >= 9);
  }

  TEST_CASE("perfectly predictable input has zero noise level and cannot be charted") {
    const auto seq = oracle::noiseless_s1(16, 8);
    const double th = estimate_theta_sq(seq, 5, FitConfig{});
    CHECK(th == 0.0);
    MonitorState s;
    s.theta_sq = th;
    CHECK_THROWS_AS(run_monitor(seq, s, FitConfig{}, {5, false}), PreconditionError);
    CHECK_THROWS_AS(estimate_theta_sq(seq, 8, FitConfig{}), PreconditionError);
  }

  TEST_CASE("an infinite limit never signals and charts every frame") {
    ScenarioSpec spec;
    spec.n = 16;
    spec.horizon = 10;
    spec.seed = 4;
    const auto stream = generate_sequence(spec);
    MonitorState s;
    s.kappa = 0.5;
    s.theta_sq = 0.0225;
    const auto res = run_monitor(stream, s, FitConfig{}, {6, false});
    CHECK_FALSE(res.first_signal);
    REQUIRE(res.history.size() == 4);
    CHECK(res.history.front().k == 7);
    CHECK(res.history.back().t == 10.0);
    for (const auto& rec : res.history) CHECK(rec.Q >= 0.0);
    MonitorState s2 = s;
    CHECK_THROWS_AS(run_monitor(stream.slice(0, 6), s2, FitConfig{}, {6, false}), PreconditionError);
  }

  TEST_CASE("a doubled drift rate signals on the first frame after the change") {
    ScenarioSpec spec;
    spec.n = 64;
    spec.horizon = 24;
    spec.regime = Regime::OC;
    spec.seed = 21;
    MonitorState s;
    s.kappa = 0.9;
    s.q0 = 1.3;
    s.theta_sq = 0.0224;
    const auto res = run_monitor(generate_sequence(spec), s, FitConfig{}, {20, false});
    REQUIRE(res.first_signal);
    CHECK(*res.first_signal == 21);
    CHECK(res.history.size() == 1);
  }

  TEST_CASE("chart CSV layout") {
    MonitorState s;
    s.q0 = 0.5;
    cusum_update(s, 2.0, 2.0, 3, 3.5);
    std::ostringstream out;
    write_chart_csv(out, s.history);
    const std::string text = out.str();
    CHECK(text.rfind("k,t,lambda,increment,Q,signal\n3,3.5,2,", 0) == 0);
    CHECK(text.substr(text.size() - 3) == ",1\n");
  }
}
