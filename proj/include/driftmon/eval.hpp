#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftmon/calibrate.hpp"
#include "driftmon/ort.hpp"
#include "driftmon/simgen.hpp"

namespace driftmon {

struct ExperimentConfig {
  std::size_t m0 = 20;
  std::size_t n_reps = 50;
  std::size_t max_run_length = 200;
  std::uint64_t seed = 0;
  void validate() const;
};

struct ReplicateOutcome {
  std::uint64_t seed = 0;
  std::size_t run_length = 0;  // monitored frames up to and including the signal
  bool censored = false;
  double signal_time = 0.0;    // time of the signalling frame; unset when censored
  std::optional<double> delay;  // signal_time - change_time, OC runs signalling after the change
};

struct RunLengthReport {
  Regime regime = Regime::IC;
  double change_time = 0.0;
  std::vector<ReplicateOutcome> outcomes;
  double arl = 0.0;
  double sd = 0.0;
  std::size_t censored = 0;
  std::vector<double> detection_delays;
  double mean_delay = 0.0;
  double sd_delay = 0.0;
  std::size_t false_alarms = 0;  // OC signals at or before the change

  std::vector<std::size_t> run_lengths() const;
};

/// Phase-I noise level for a scenario: estimate_theta_sq on an in-control
/// stream of m0 + calibration_frames frames drawn from its own substream.
double scenario_theta_sq(const ScenarioSpec& spec, std::size_t m0, std::size_t calibration_frames,
                         const FitConfig& fit, std::uint64_t seed);

/// Aggregates per-replicate outcomes; order of outcomes does not matter for
/// the statistics.
RunLengthReport summarize(Regime regime, double change_time, std::vector<ReplicateOutcome> outcomes);

/// Runs the chart on replicates of `paths` (streams of `spec`). Frame k of a
/// generated stream sits at time k, so a signal after s monitored frames
/// happens at t = m0 + s.
RunLengthReport replicate_experiment(LambdaPaths& paths, const ScenarioSpec& spec, double kappa, double q0,
                                     const ExperimentConfig& cfg);

/// Convenience form that builds the lambda paths from the scenario itself.
RunLengthReport replicate_experiment(const ScenarioSpec& spec, double kappa, double q0, double theta_sq,
                                     const ExperimentConfig& cfg, const FitConfig& fit);

struct NormalityDiagnostic {
  double mean = 0.0;
  double variance = 0.0;
  double ks_distance = 0.0;
};

/// Sample mean, sample variance and KS distance to N(0, 1). Needs >= 100 values.
NormalityDiagnostic normality_diagnostic(std::span<const double> values);

/// (n_eff / sqrt 2)(lambda - 1) over the first `steps` monitored frames of
/// replicates 0..n_reps-1.
std::vector<double> standardized_increments(LambdaPaths& paths, std::size_t n_reps, std::size_t steps);

/// Header rep,seed,regime,run_length,censored,delay.
void write_report_csv(std::ostream& out, const RunLengthReport& report);

/// "arl (sd)" cells, one row per report, labelled by `labels`.
void write_summary_csv(std::ostream& out, std::span<const std::string> labels,
                       std::span<const RunLengthReport> reports);

std::string format_cell(double value, double sd);

}  // namespace driftmon
