#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "driftmon/error.hpp"
#include "driftmon/eval.hpp"

using namespace driftmon;

namespace {

ReplicateOutcome hit(std::size_t run_length, double signal_time, std::optional<double> delay) {
  ReplicateOutcome o;
  o.run_length = run_length;
  o.signal_time = signal_time;
  o.delay = delay;
  return o;
}

ScenarioSpec small(Regime regime) {
  ScenarioSpec s;
  s.n = 12;
  s.regime = regime;
  s.change_time = 8;
  return s;
}

FitConfig quick_fit() {
  FitConfig f;
  f.n_grid_directions = 16;
  return f;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("delays count only signals after the change") {
    std::vector<ReplicateOutcome> out{hit(1, 21, 1.0), hit(3, 23, 3.0), hit(1, 21, 1.0), hit(0, 0, std::nullopt)};
    out[3].run_length = 60;
    out[3].censored = true;
    out.push_back(hit(2, 18, std::nullopt));
    const RunLengthReport r = summarize(Regime::OC, 20, out);
    CHECK(r.censored == 1);
    CHECK(r.false_alarms == 1);
    REQUIRE(r.detection_delays.size() == 3);
    CHECK(r.mean_delay == doctest::Approx(5.0 / 3.0));
    CHECK(r.arl == doctest::Approx((1 + 3 + 1 + 60 + 2) / 5.0));
  }

  TEST_CASE("report statistics ignore replicate order") {
    std::vector<ReplicateOutcome> out{hit(4, 24, 4.0), hit(1, 21, 1.0), hit(9, 29, 9.0), hit(2, 22, 2.0)};
    const RunLengthReport a = summarize(Regime::OC, 20, out);
    std::reverse(out.begin(), out.end());
    const RunLengthReport b = summarize(Regime::OC, 20, out);
    CHECK(a.arl == doctest::Approx(b.arl).epsilon(1e-15));
    CHECK(a.sd == doctest::Approx(b.sd).epsilon(1e-15));
    CHECK(a.mean_delay == doctest::Approx(b.mean_delay).epsilon(1e-15));
  }

  TEST_CASE("constant run lengths report 1.000 (0.000)") {
    const RunLengthReport r = summarize(Regime::OC, 20, {hit(1, 21, 1.0), hit(1, 21, 1.0), hit(1, 21, 1.0)});
    CHECK(format_cell(r.arl, r.sd) == "1.000 (0.000)");
    CHECK(format_cell(r.mean_delay, r.sd_delay) == "1.000 (0.000)");
  }

  TEST_CASE("an infinite limit censors every replicate") {
    ExperimentConfig cfg;
    cfg.m0 = 4;
    cfg.n_reps = 3;
    cfg.max_run_length = 5;
    const auto r = replicate_experiment(small(Regime::OC), 0.5, std::numeric_limits<double>::infinity(), 0.0225, cfg,
                                        quick_fit());
    CHECK(r.censored == 3);
    CHECK(r.detection_delays.empty());
    CHECK(r.arl == 5.0);
  }

  TEST_CASE("a change that never happens reproduces the in-control report") {
    ExperimentConfig cfg;
    cfg.m0 = 4;
    cfg.n_reps = 4;
    cfg.max_run_length = 12;
    cfg.seed = 6;
    ScenarioSpec oc = small(Regime::OC);
    oc.change_time = 1e9;
    const auto a = replicate_experiment(small(Regime::IC), 0.2, 1.0, 0.0225, cfg, quick_fit());
    const auto b = replicate_experiment(oc, 0.2, 1.0, 0.0225, cfg, quick_fit());
    CHECK(a.run_lengths() == b.run_lengths());
    CHECK(b.false_alarms == 4 - b.censored);
  }

  TEST_CASE("normality diagnostic") {
    Rng rng(2024);
    std::vector<double> z(10000);
    for (double& v : z) v = rng.normal();
    const auto d = normality_diagnostic(z);
    CHECK(std::abs(d.mean) <= 0.05);
    CHECK(d.variance >= 0.95);
    CHECK(d.variance <= 1.05);
    CHECK(d.ks_distance < 0.02);

    const std::vector<double> zeros(200, 0.0);
    const auto c = normality_diagnostic(zeros);
    CHECK(c.mean == 0.0);
    CHECK(c.variance == 0.0);
    CHECK(c.ks_distance == doctest::Approx(0.5));
    CHECK_THROWS_AS(normality_diagnostic(std::span(zeros).first(99)), PreconditionError);
  }

  TEST_CASE("report and summary CSV layout") {
    const RunLengthReport r = summarize(Regime::OC, 20, {hit(1, 21, 1.0), hit(2, 18, std::nullopt)});
    std::ostringstream rep;
    write_report_csv(rep, r);
    CHECK(rep.str() == "rep,seed,regime,run_length,censored,delay\n0,0,oc,1,0,1\n1,0,oc,2,0,\n");
    std::ostringstream sum;
    const std::vector<std::string> labels{"s1"};
    write_summary_csv(sum, labels, std::span(&r, 1));
    CHECK(sum.str() == "label,regime,reps,arl,censored,delay,false_alarms\ns1,oc,2,\"1.500 (0.707)\",0,\"1.000 (0.000)\",1\n");
  }
}
