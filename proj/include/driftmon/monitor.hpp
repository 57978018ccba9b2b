#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "driftmon/image.hpp"
#include "driftmon/ort.hpp"

namespace driftmon {

struct ChartRecord {
  std::size_t k = 0;  // 1-based position of the monitored frame in the stream
  double t = 0.0;
  double lambda = 0.0;
  double increment = 0.0;  // pre-floor change (n_eff / sqrt 2)(lambda - 1) - kappa
  double Q = 0.0;
  bool signal = false;
};

/// Running CUSUM chart. Q starts at 0 when monitoring begins.
struct MonitorState {
  double kappa = 0.0;
  double q0 = std::numeric_limits<double>::infinity();
  double theta_sq = 0.0;
  double Q = 0.0;
  bool signaled = false;
  std::vector<ChartRecord> history;

  void validate() const;
};

/// Residual sum of squares over (pixels - K) degrees of freedom, divided by
/// theta_sq. Throws DegenerateDofError when K >= pixels.
double lambda_stat(const ImageFrame& observed, const ImageFrame& denoised, std::size_t K, double theta_sq);

/// sqrt(nx * ny): the frame side for square frames.
double effective_side(Dims dims);

/// Adds one chart point: Q = max(0, Q + (n_eff / sqrt 2)(lambda - 1) - kappa),
/// signal when Q > q0.
void cusum_update(MonitorState& state, double lambda, double n_eff, std::size_t k = 0, double t = 0.0);

/// Outcome of predicting one frame from the frames before it.
struct PredictionStep {
  double residual_ss = 0.0;  // sum of (denoised - observed)^2
  std::size_t leaves = 0;    // K
  std::size_t pixels = 0;

  double per_dof() const;
};

/// Fits on `window`, partitions `next` at its own time and leaf-averages it.
PredictionStep predict_next(const ImageSequence& window, const ImageFrame& next, const FitConfig& cfg);

/// Mean per-degree-of-freedom prediction error over frames m0+1..M, each
/// predicted from its trailing m0 frames. May be 0 for noiseless input.
double estimate_theta_sq(const ImageSequence& ic_sequence, std::size_t m0, const FitConfig& cfg);

struct MonitorOptions {
  std::size_t m0 = 20;
  bool continue_after_signal = false;
};

struct MonitorResult {
  std::vector<ChartRecord> history;
  std::optional<std::size_t> first_signal;  // k of the first signalling frame
};

/// Phase-II loop over frames m0+1..end of `stream`; the first m0 frames form
/// the initial window. Stops at the first signal unless asked to continue.
MonitorResult run_monitor(const ImageSequence& stream, MonitorState& state, const FitConfig& cfg,
                          const MonitorOptions& opts);

/// Header k,t,lambda,increment,Q,signal; reals with 17 significant digits.
void write_chart_csv(std::ostream& out, std::span<const ChartRecord> history);

}  // namespace driftmon
