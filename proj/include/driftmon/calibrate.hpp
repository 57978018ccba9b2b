#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "driftmon/image.hpp"
#include "driftmon/ort.hpp"
#include "driftmon/simgen.hpp"

namespace driftmon {

struct CalibrationConfig {
  double arl0 = 20.0;
  std::size_t n_replications = 100;
  std::optional<std::size_t> max_run_length;  // unset: 10 * arl0
  /// Unset: start at [0, 1] and double the upper end until it reaches arl0.
  std::optional<std::pair<double, double>> q0_bracket;
  double tolerance = 0.5;
  std::size_t max_bisection_steps = 30;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t censor_bound() const;
};

/// Raised when the bracket does not straddle the target ARL.
class BracketError : public std::runtime_error {
 public:
  BracketError(double lo, double hi, double arl_lo, double arl_hi);
  double lo, hi, arl_lo, arl_hi;
};

/// In-control streams addressed by (replicate, 0-based frame index).
struct ReplicateSource {
  std::function<ImageFrame(std::uint64_t rep, std::size_t index)> frame;
  std::size_t length = 0;
};

/// Replicate r is the scenario with seed derive_seed(seed, r); the horizon
/// is ignored so streams are as long as needed.
ReplicateSource scenario_source(const ScenarioSpec& spec, std::uint64_t seed);

/// Lambda values of each replicate's monitored frames, computed on demand
/// and kept. Lambda does not depend on kappa or q0, so every chart run with
/// the same replicates and theta_sq reuses them.
class LambdaPaths {
 public:
  LambdaPaths(ReplicateSource source, std::size_t m0, FitConfig fit, double theta_sq);

  /// Makes replicates 0..n_reps-1 safe to extend concurrently.
  void prepare(std::size_t n_reps);
  /// Lambda at monitored steps 1..count of replicate `rep`.
  std::span<const double> get(std::uint64_t rep, std::size_t count);
  double n_eff() const { return n_eff_; }
  std::size_t m0() const { return m0_; }

 private:
  void extend(std::uint64_t rep, std::size_t count);

  ReplicateSource source_;
  std::size_t m0_;
  FitConfig fit_;
  double theta_sq_;
  double n_eff_;
  std::vector<std::vector<double>> paths_;
};

/// Run-length summary. Censored runs count as the censoring bound.
struct ArlEstimate {
  double arl = 0.0;
  double sd = 0.0;
  std::size_t censored = 0;
  std::vector<std::size_t> run_lengths;
};

/// 1-based step at which the CUSUM first exceeds q0, if it does within the
/// given lambdas.
std::optional<std::size_t> first_crossing(std::span<const double> lambdas, double kappa, double q0, double n_eff);

ArlEstimate summarize_run_lengths(std::vector<std::size_t> run_lengths, std::size_t censored);

/// Monitors the first n_replications streams with (kappa, q0).
ArlEstimate estimate_arl(LambdaPaths& paths, double kappa, double q0, const CalibrationConfig& cfg);

struct CalibrationStep {
  double q0 = 0.0;
  double arl = 0.0;
  double sd = 0.0;
  std::size_t censored = 0;
};

struct CalibrationResult {
  double q0 = 0.0;
  ArlEstimate achieved;
  std::vector<CalibrationStep> steps;  // every evaluation, in order
};

/// Bisection on q0 with the same replicates at every step. Stops when the
/// ARL is within tolerance of arl0 or after max_bisection_steps; returns the
/// evaluated q0 whose ARL was closest to arl0.
CalibrationResult calibrate_q0(LambdaPaths& paths, double kappa, const CalibrationConfig& cfg);

/// Header q0,arl,sd,censored.
void write_calibration_csv(std::ostream& out, std::span<const CalibrationStep> steps);

struct BootstrapConfig {
  std::size_t m0 = 20;
  std::size_t n_bootstrap = 50;
  double keep_fraction = 0.8;
  std::size_t j_lo = 0;  // 1-based frame positions averaged over; 0 = m0 + 1
  std::size_t j_hi = 0;  // 0 = last frame
  std::uint64_t seed = 0;

  /// Validates against a sequence of M frames and fills in default j range.
  BootstrapConfig resolved(std::size_t sequence_length) const;
};

/// kappa = (1/B) sum_i mean_{j in [j_lo, j_hi]} Q_ij / j, where paths[i][s]
/// is Q at frame position first_k + s.
double kappa_from_paths(const std::vector<std::vector<double>>& q_paths, std::size_t first_k, std::size_t j_lo,
                        std::size_t j_hi);

/// Mean plus the 95% normal quantile times the sample SD.
double quantile_q0(std::span<const double> q_values);

/// CUSUM values along a lambda path.
std::vector<double> cusum_path(std::span<const double> lambdas, double kappa, double n_eff);

struct BootstrapCalibration {
  double theta_sq = 0.0;
  double kappa = 0.0;
  double q0 = 0.0;
  std::vector<std::vector<double>> lambda_paths;  // per sample, frames m0+1..M
};

/// Resamples frames (first and last always kept), re-imputes the omitted
/// ones, and records lambda at every monitored frame of each sample.
std::vector<std::vector<double>> bootstrap_lambda_paths(const ImageSequence& ic_sequence, const BootstrapConfig& cfg,
                                                        const FitConfig& fit, double theta_sq);

double bootstrap_kappa(const ImageSequence& ic_sequence, const BootstrapConfig& cfg, const FitConfig& fit);

/// theta_sq from the sequence, kappa from the kappa = 0 paths, then q0 from
/// the Q values at positions j_lo..j_hi of the paths rerun with that kappa.
BootstrapCalibration bootstrap_calibrate(const ImageSequence& ic_sequence, const BootstrapConfig& cfg,
                                         const FitConfig& fit);

}  // namespace driftmon
