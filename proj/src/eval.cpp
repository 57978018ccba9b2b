#include "driftmon/eval.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "driftmon/error.hpp"
#include "driftmon/monitor.hpp"
#include "driftmon/parallel.hpp"
#include "driftmon/rng.hpp"
#include "driftmon/stats.hpp"

namespace driftmon {

void ExperimentConfig::validate() const {
  if (m0 < 2) throw PreconditionError("m0 must be at least 2");
  if (n_reps < 1) throw PreconditionError("n_reps must be positive");
  if (max_run_length < 1) throw PreconditionError("max_run_length must be positive");
}

std::vector<std::size_t> RunLengthReport::run_lengths() const {
  std::vector<std::size_t> out;
  for (const auto& o : outcomes) out.push_back(o.run_length);
  return out;
}

double scenario_theta_sq(const ScenarioSpec& spec, std::size_t m0, std::size_t calibration_frames,
                         const FitConfig& fit, std::uint64_t seed) {
  if (calibration_frames < 1) throw PreconditionError("need at least one calibration frame");
  ScenarioSpec s = spec;
  s.regime = Regime::IC;
  s.horizon = m0 + calibration_frames;
  s.seed = derive_seed(seed, "phase-one");
  return estimate_theta_sq(generate_sequence(s), m0, fit);
}

RunLengthReport summarize(Regime regime, double change_time, std::vector<ReplicateOutcome> outcomes) {
  RunLengthReport r;
  r.regime = regime;
  r.change_time = change_time;
  std::vector<double> lengths;
  for (const auto& o : outcomes) {
    lengths.push_back(static_cast<double>(o.run_length));
    if (o.censored) ++r.censored;
    if (o.delay) r.detection_delays.push_back(*o.delay);
    if (regime == Regime::OC && !o.censored && !o.delay) ++r.false_alarms;
  }
  r.arl = mean(lengths);
  r.sd = sample_sd(lengths);
  r.mean_delay = mean(r.detection_delays);
  r.sd_delay = sample_sd(r.detection_delays);
  r.outcomes = std::move(outcomes);
  return r;
}

RunLengthReport replicate_experiment(LambdaPaths& paths, const ScenarioSpec& spec, double kappa, double q0,
                                     const ExperimentConfig& cfg) {
  cfg.validate();
  if (!(kappa >= 0.0)) throw PreconditionError("kappa must be nonnegative");
  if (std::isnan(q0) || q0 < 0.0) throw PreconditionError("q0 must be nonnegative");
  if (paths.m0() != cfg.m0) throw PreconditionError("lambda paths use a different window width");
  paths.prepare(cfg.n_reps);
  std::vector<ReplicateOutcome> outcomes(cfg.n_reps);
  parallel_for(cfg.n_reps, [&](std::size_t r) {
    ReplicateOutcome& o = outcomes[r];
    o.seed = derive_seed(cfg.seed, r);
    for (std::size_t count = 1; count <= cfg.max_run_length; ++count) {
      if (const auto hit = first_crossing(paths.get(r, count), kappa, q0, paths.n_eff())) {
        o.run_length = *hit;
        o.signal_time = static_cast<double>(cfg.m0 + *hit);
        if (spec.regime == Regime::OC && o.signal_time > spec.change_time) o.delay = o.signal_time - spec.change_time;
        return;
      }
    }
    o.run_length = cfg.max_run_length;
    o.censored = true;
    o.signal_time = std::nan("");
  });
  return summarize(spec.regime, spec.change_time, std::move(outcomes));
}

RunLengthReport replicate_experiment(const ScenarioSpec& spec, double kappa, double q0, double theta_sq,
                                     const ExperimentConfig& cfg, const FitConfig& fit) {
  LambdaPaths paths(scenario_source(spec, cfg.seed), cfg.m0, fit, theta_sq);
  return replicate_experiment(paths, spec, kappa, q0, cfg);
}

NormalityDiagnostic normality_diagnostic(std::span<const double> values) {
  if (values.size() < 100) throw PreconditionError("normality diagnostic needs at least 100 values");
  return {mean(values), sample_variance(values), ks_distance_to_normal(values)};
}

std::vector<double> standardized_increments(LambdaPaths& paths, std::size_t n_reps, std::size_t steps) {
  paths.prepare(n_reps);
  std::vector<std::vector<double>> per_rep(n_reps);
  parallel_for(n_reps, [&](std::size_t r) {
    for (double lam : paths.get(r, steps)) per_rep[r].push_back(paths.n_eff() / std::sqrt(2.0) * (lam - 1.0));
  });
  std::vector<double> out;
  for (const auto& v : per_rep) out.insert(out.end(), v.begin(), v.end());
  return out;
}

void write_report_csv(std::ostream& out, const RunLengthReport& report) {
  out << "rep,seed,regime,run_length,censored,delay\n";
  const std::string regime = to_string(report.regime);
  char buf[160];
  for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
    const auto& o = report.outcomes[i];
    std::snprintf(buf, sizeof buf, "%zu,%llu,%s,%zu,%d,", i, static_cast<unsigned long long>(o.seed), regime.c_str(),
                  o.run_length, o.censored ? 1 : 0);
    out << buf;
    if (o.delay) {
      std::snprintf(buf, sizeof buf, "%.17g", *o.delay);
      out << buf;
    }
    out << '\n';
  }
}

std::string format_cell(double value, double sd) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f (%.3f)", value, sd);
  return buf;
}

void write_summary_csv(std::ostream& out, std::span<const std::string> labels,
                       std::span<const RunLengthReport> reports) {
  if (labels.size() != reports.size()) throw PreconditionError("one label per report");
  out << "label,regime,reps,arl,censored,delay,false_alarms\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out << labels[i] << ',' << to_string(r.regime) << ',' << r.outcomes.size() << ",\"" << format_cell(r.arl, r.sd)
        << "\"," << r.censored << ',';
    if (!r.detection_delays.empty()) out << '"' << format_cell(r.mean_delay, r.sd_delay) << '"';
    out << ',' << r.false_alarms << '\n';
  }
}

}  // namespace driftmon
