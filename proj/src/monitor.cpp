#include "driftmon/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "driftmon/error.hpp"
#include "driftmon/predict.hpp"
#include "driftmon/stats.hpp"

namespace driftmon {

void MonitorState::validate() const {
  if (!(kappa >= 0.0)) throw PreconditionError("kappa must be nonnegative");
  if (std::isnan(q0) || q0 < 0.0) throw PreconditionError("q0 must be nonnegative");
  if (!(Q >= 0.0)) throw PreconditionError("Q must be nonnegative");
}

double lambda_stat(const ImageFrame& observed, const ImageFrame& denoised, std::size_t K, double theta_sq) {
  if (observed.dims() != denoised.dims()) throw PreconditionError("observed and denoised dims differ");
  if (!(theta_sq > 0.0)) throw PreconditionError("theta_sq must be positive");
  const std::size_t pixels = observed.size();
  if (K >= pixels) throw DegenerateDofError("leaf count leaves no residual degrees of freedom");
  auto a = observed.values();
  auto b = denoised.values();
  CompensatedSum ss;
  for (std::size_t i = 0; i < pixels; ++i) ss.add((b[i] - a[i]) * (b[i] - a[i]));
  return ss.value() / (static_cast<double>(pixels - K) * theta_sq);
}

double effective_side(Dims dims) { return std::sqrt(static_cast<double>(dims.nx) * static_cast<double>(dims.ny)); }

void cusum_update(MonitorState& state, double lambda, double n_eff, std::size_t k, double t) {
  if (!(n_eff > 0.0)) throw PreconditionError("n_eff must be positive");
  const double inc = n_eff / std::sqrt(2.0) * (lambda - 1.0) - state.kappa;
  state.Q = std::max(0.0, state.Q + inc);
  const bool signal = state.Q > state.q0;
  state.signaled = state.signaled || signal;
  state.history.push_back({k, t, lambda, inc, state.Q, signal});
}

double PredictionStep::per_dof() const {
  if (leaves >= pixels) throw DegenerateDofError("leaf count leaves no residual degrees of freedom");
  return residual_ss / static_cast<double>(pixels - leaves);
}

PredictionStep predict_next(const ImageSequence& window, const ImageFrame& next, const FitConfig& cfg) {
  if (next.dims() != window.dims()) throw PreconditionError("frame dims differ from the window");
  const FittedTree tree = fit_tree(window, cfg);
  const PredictedPartition part = partition_at(tree, next.dims(), next.time());
  const ImageFrame fhat = denoise_frame(next, part);
  PredictionStep step;
  step.leaves = part.nonempty_leaf_count;
  step.pixels = next.size();
  CompensatedSum ss;
  auto a = next.values();
  auto b = fhat.values();
  for (std::size_t i = 0; i < a.size(); ++i) ss.add((b[i] - a[i]) * (b[i] - a[i]));
  step.residual_ss = ss.value();
  return step;
}

double estimate_theta_sq(const ImageSequence& ic_sequence, std::size_t m0, const FitConfig& cfg) {
  if (m0 < 2) throw PreconditionError("m0 must be at least 2");
  if (ic_sequence.size() <= m0) throw PreconditionError("in-control sequence must be longer than m0");
  CompensatedSum sum;
  for (std::size_t k = m0; k < ic_sequence.size(); ++k)
    sum.add(predict_next(ic_sequence.slice(k - m0, m0), ic_sequence[k], cfg).per_dof());
  return sum.value() / static_cast<double>(ic_sequence.size() - m0);
}

MonitorResult run_monitor(const ImageSequence& stream, MonitorState& state, const FitConfig& cfg,
                          const MonitorOptions& opts) {
  state.validate();
  if (opts.m0 < 2) throw PreconditionError("m0 must be at least 2");
  if (stream.size() < opts.m0 + 1) throw PreconditionError("stream shorter than m0 + 1 frames");
  if (!(state.theta_sq > 0.0)) throw PreconditionError("theta_sq must be positive");
  const double n_eff = effective_side(stream.dims());
  MonitorResult result;
  for (std::size_t k = opts.m0; k < stream.size(); ++k) {
    const PredictionStep step = predict_next(stream.slice(k - opts.m0, opts.m0), stream[k], cfg);
    if (step.leaves >= step.pixels) throw DegenerateDofError("leaf count leaves no residual degrees of freedom");
    const double lambda = step.residual_ss / (static_cast<double>(step.pixels - step.leaves) * state.theta_sq);
    cusum_update(state, lambda, n_eff, k + 1, stream[k].time());
    result.history.push_back(state.history.back());
    if (state.history.back().signal && !result.first_signal) {
      result.first_signal = k + 1;
      if (!opts.continue_after_signal) break;
    }
  }
  return result;
}

void write_chart_csv(std::ostream& out, std::span<const ChartRecord> history) {
  out << "k,t,lambda,increment,Q,signal\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%d\n", r.k, r.t, r.lambda, r.increment, r.Q,
                  r.signal ? 1 : 0);
    out << buf;
  }
}

}  // namespace driftmon
