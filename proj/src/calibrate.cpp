#include "driftmon/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "driftmon/error.hpp"
#include "driftmon/monitor.hpp"
#include "driftmon/parallel.hpp"
#include "driftmon/preprocess.hpp"
#include "driftmon/rng.hpp"
#include "driftmon/stats.hpp"

namespace driftmon {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void CalibrationConfig::validate() const {
  if (!(arl0 >= 1.0)) throw PreconditionError("arl0 must be at least 1");
  if (n_replications < 1) throw PreconditionError("n_replications must be positive");
  if (max_run_length && *max_run_length < 1) throw PreconditionError("max_run_length must be positive");
  if (q0_bracket && !(q0_bracket->first >= 0.0 && q0_bracket->first < q0_bracket->second))
    throw PreconditionError("q0 bracket needs 0 <= low < high");
  if (!(tolerance > 0.0)) throw PreconditionError("tolerance must be positive");
}

std::size_t CalibrationConfig::censor_bound() const {
  if (max_run_length) return *max_run_length;
  return static_cast<std::size_t>(std::ceil(10.0 * arl0));
}

BracketError::BracketError(double lo_, double hi_, double arl_lo_, double arl_hi_)
    : std::runtime_error("q0 bracket [" + fmt(lo_) + ", " + fmt(hi_) + "] does not straddle the target: ARL " +
                         fmt(arl_lo_) + " at low end, " + fmt(arl_hi_) + " at high end"),
      lo(lo_),
      hi(hi_),
      arl_lo(arl_lo_),
      arl_hi(arl_hi_) {}

ReplicateSource scenario_source(const ScenarioSpec& spec, std::uint64_t seed) {
  spec.validate();
  ReplicateSource src;
  src.length = std::numeric_limits<std::size_t>::max();
  src.frame = [spec, seed](std::uint64_t rep, std::size_t index) {
    ScenarioSpec s = spec;
    s.seed = derive_seed(seed, rep);
    return generate_frame(s, index);
  };
  return src;
}

LambdaPaths::LambdaPaths(ReplicateSource source, std::size_t m0, FitConfig fit, double theta_sq)
    : source_(std::move(source)), m0_(m0), fit_(std::move(fit)), theta_sq_(theta_sq) {
  if (!source_.frame) throw PreconditionError("replicate source has no frame generator");
  if (m0_ < 2) throw PreconditionError("m0 must be at least 2");
  if (!(theta_sq_ > 0.0)) throw PreconditionError("theta_sq must be positive");
  fit_.validate();
  n_eff_ = effective_side(source_.frame(0, 0).dims());
}

void LambdaPaths::prepare(std::size_t n_reps) {
  if (paths_.size() < n_reps) paths_.resize(n_reps);
}

std::span<const double> LambdaPaths::get(std::uint64_t rep, std::size_t count) {
  if (rep >= paths_.size()) paths_.resize(rep + 1);
  if (paths_[rep].size() < count) extend(rep, count);
  return std::span<const double>(paths_[rep]).first(count);
}

void LambdaPaths::extend(std::uint64_t rep, std::size_t count) {
  if (count > source_.length - m0_ || m0_ + count > source_.length)
    throw PreconditionError("replicate stream too short for the requested run length");
  auto& path = paths_[rep];
  const std::size_t have = path.size();
  // Step s (1-based) predicts frame m0 + s - 1 from frames s - 1 .. m0 + s - 2.
  ImageSequence frames;
  for (std::size_t i = have; i < m0_ + count; ++i) frames.push_back(source_.frame(rep, i));
  for (std::size_t s = have + 1; s <= count; ++s) {
    const std::size_t first = s - 1 - have;
    const PredictionStep step = predict_next(frames.slice(first, m0_), frames[first + m0_], fit_);
    path.push_back(step.per_dof() / theta_sq_);
  }
}

std::optional<std::size_t> first_crossing(std::span<const double> lambdas, double kappa, double q0, double n_eff) {
  const double scale = n_eff / std::sqrt(2.0);
  double q = 0.0;
  for (std::size_t s = 0; s < lambdas.size(); ++s) {
    q = std::max(0.0, q + scale * (lambdas[s] - 1.0) - kappa);
    if (q > q0) return s + 1;
  }
  return std::nullopt;
}

ArlEstimate summarize_run_lengths(std::vector<std::size_t> run_lengths, std::size_t censored) {
  ArlEstimate e;
  std::vector<double> v(run_lengths.begin(), run_lengths.end());
  e.arl = mean(v);
  e.sd = sample_sd(v);
  e.censored = censored;
  e.run_lengths = std::move(run_lengths);
  return e;
}

ArlEstimate estimate_arl(LambdaPaths& paths, double kappa, double q0, const CalibrationConfig& cfg) {
  cfg.validate();
  if (!(kappa >= 0.0)) throw PreconditionError("kappa must be nonnegative");
  if (std::isnan(q0) || q0 < 0.0) throw PreconditionError("q0 must be nonnegative");
  const std::size_t bound = cfg.censor_bound();
  const std::size_t reps = cfg.n_replications;
  paths.prepare(reps);
  std::vector<std::size_t> lengths(reps);
  std::vector<char> censored(reps, 0);
  parallel_for(reps, [&](std::size_t r) {
    // Grow one step at a time so no fit is spent beyond the signal.
    std::size_t have = 0;
    for (std::size_t count = 1; count <= bound; ++count) {
      const auto lam = paths.get(r, count);
      if (const auto hit = first_crossing(lam, kappa, q0, paths.n_eff())) {
        lengths[r] = *hit;
        return;
      }
      have = count;
    }
    lengths[r] = have;
    censored[r] = 1;
  });
  const auto n_censored = static_cast<std::size_t>(std::count(censored.begin(), censored.end(), 1));
  return summarize_run_lengths(std::move(lengths), n_censored);
}

CalibrationResult calibrate_q0(LambdaPaths& paths, double kappa, const CalibrationConfig& cfg) {
  cfg.validate();
  CalibrationResult result;
  std::vector<ArlEstimate> estimates;
  auto eval = [&](double q0) -> const ArlEstimate& {
    estimates.push_back(estimate_arl(paths, kappa, q0, cfg));
    const ArlEstimate& e = estimates.back();
    result.steps.push_back({q0, e.arl, e.sd, e.censored});
    return e;
  };
  auto close_enough = [&](double arl) { return std::abs(arl - cfg.arl0) <= cfg.tolerance; };

  double lo = 0.0, hi = 1.0;
  if (cfg.q0_bracket) {
    lo = cfg.q0_bracket->first;
    hi = cfg.q0_bracket->second;
    const double arl_lo = eval(lo).arl;
    const double arl_hi = eval(hi).arl;
    if (arl_lo > cfg.arl0 || arl_hi < cfg.arl0) throw BracketError(lo, hi, arl_lo, arl_hi);
  } else {
    const double arl_lo = eval(lo).arl;
    if (arl_lo > cfg.arl0) throw BracketError(lo, hi, arl_lo, std::numeric_limits<double>::quiet_NaN());
    constexpr int kMaxDoublings = 60;
    int doublings = 0;
    while (!close_enough(result.steps.back().arl) && eval(hi).arl < cfg.arl0) {
      if (++doublings > kMaxDoublings) throw BracketError(0.0, hi, arl_lo, result.steps.back().arl);
      lo = hi;
      hi *= 2.0;
    }
  }
  for (std::size_t step = 0; step < cfg.max_bisection_steps && !close_enough(result.steps.back().arl); ++step) {
    // The last evaluation may be an endpoint; stop early only on a hit.
    bool hit = false;
    for (const auto& s : result.steps) hit = hit || close_enough(s.arl);
    if (hit) break;
    const double mid = 0.5 * (lo + hi);
    if (eval(mid).arl < cfg.arl0)
      lo = mid;
    else
      hi = mid;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.steps.size(); ++i) {
    const double d = std::abs(result.steps[i].arl - cfg.arl0);
    const double db = std::abs(result.steps[best].arl - cfg.arl0);
    if (d < db || (d == db && result.steps[i].q0 < result.steps[best].q0)) best = i;
  }
  result.q0 = result.steps[best].q0;
  result.achieved = estimates[best];
  return result;
}

void write_calibration_csv(std::ostream& out, std::span<const CalibrationStep> steps) {
  out << "q0,arl,sd,censored\n";
  char buf[160];
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%zu\n", s.q0, s.arl, s.sd, s.censored);
    out << buf;
  }
}

BootstrapConfig BootstrapConfig::resolved(std::size_t sequence_length) const {
  BootstrapConfig c = *this;
  if (c.m0 < 2) throw PreconditionError("m0 must be at least 2");
  if (c.n_bootstrap < 1) throw PreconditionError("need at least one bootstrap sample");
  if (!(c.keep_fraction > 0.0 && c.keep_fraction <= 1.0)) throw PreconditionError("keep fraction must be in (0, 1]");
  if (sequence_length <= c.m0) throw PreconditionError("in-control sequence must be longer than m0");
  if (c.j_lo == 0) c.j_lo = c.m0 + 1;
  if (c.j_hi == 0) c.j_hi = sequence_length;
  if (c.j_lo <= c.m0 || c.j_hi > sequence_length || c.j_lo > c.j_hi)
    throw PreconditionError("averaging range must satisfy m0 < j_lo <= j_hi <= sequence length");
  return c;
}

double kappa_from_paths(const std::vector<std::vector<double>>& q_paths, std::size_t first_k, std::size_t j_lo,
                        std::size_t j_hi) {
  if (q_paths.empty()) throw PreconditionError("need at least one bootstrap path");
  if (j_lo > j_hi || j_lo < first_k || j_lo == 0) throw PreconditionError("empty or invalid averaging range");
  CompensatedSum outer;
  for (const auto& path : q_paths) {
    if (j_hi - first_k >= path.size()) throw PreconditionError("averaging range exceeds the path");
    CompensatedSum inner;
    for (std::size_t j = j_lo; j <= j_hi; ++j) inner.add(path[j - first_k] / static_cast<double>(j));
    outer.add(inner.value() / static_cast<double>(j_hi - j_lo + 1));
  }
  return outer.value() / static_cast<double>(q_paths.size());
}

double quantile_q0(std::span<const double> q_values) {
  if (q_values.size() < 2) throw PreconditionError("need at least two Q values");
  return mean(q_values) + kNormalQuantile95 * sample_sd(q_values);
}

std::vector<double> cusum_path(std::span<const double> lambdas, double kappa, double n_eff) {
  const double scale = n_eff / std::sqrt(2.0);
  std::vector<double> q(lambdas.size());
  double cur = 0.0;
  for (std::size_t s = 0; s < lambdas.size(); ++s) {
    cur = std::max(0.0, cur + scale * (lambdas[s] - 1.0) - kappa);
    q[s] = cur;
  }
  return q;
}

std::vector<std::vector<double>> bootstrap_lambda_paths(const ImageSequence& ic_sequence, const BootstrapConfig& cfg,
                                                        const FitConfig& fit, double theta_sq) {
  const BootstrapConfig c = cfg.resolved(ic_sequence.size());
  if (!(theta_sq > 0.0)) throw PreconditionError("theta_sq must be positive");
  const std::size_t M = ic_sequence.size();
  const std::size_t keep =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(c.keep_fraction * static_cast<double>(M))), 2, M);
  const std::vector<double> times = ic_sequence.times();
  std::vector<std::vector<double>> paths(c.n_bootstrap);
  parallel_for(c.n_bootstrap, [&](std::size_t i) {
    Rng rng(derive_seed(c.seed, i));
    std::vector<std::size_t> interior;
    for (std::size_t k = 1; k + 1 < M; ++k) interior.push_back(k);
    // Partial Fisher-Yates: the first keep - 2 entries are the kept frames.
    for (std::size_t a = 0; a + 2 < keep && a < interior.size(); ++a) {
      const std::size_t b = a + static_cast<std::size_t>(rng.next_u64() % (interior.size() - a));
      std::swap(interior[a], interior[b]);
    }
    std::vector<std::size_t> kept(interior.begin(), interior.begin() + static_cast<std::ptrdiff_t>(keep - 2));
    kept.push_back(0);
    kept.push_back(M - 1);
    std::sort(kept.begin(), kept.end());
    ImageSequence sample;
    for (std::size_t k : kept) sample.push_back(ic_sequence[k]);
    const ImageSequence full = impute_missing(sample, times);
    std::vector<double>& path = paths[i];
    for (std::size_t k = c.m0; k < M; ++k)
      path.push_back(predict_next(full.slice(k - c.m0, c.m0), full[k], fit).per_dof() / theta_sq);
  });
  return paths;
}

namespace {

BootstrapCalibration run_bootstrap(const ImageSequence& ic_sequence, const BootstrapConfig& cfg, const FitConfig& fit,
                                   bool want_q0) {
  const BootstrapConfig c = cfg.resolved(ic_sequence.size());
  BootstrapCalibration out;
  out.theta_sq = estimate_theta_sq(ic_sequence, c.m0, fit);
  out.lambda_paths = bootstrap_lambda_paths(ic_sequence, c, fit, out.theta_sq);
  const double n_eff = effective_side(ic_sequence.dims());
  const std::size_t first_k = c.m0 + 1;
  std::vector<std::vector<double>> q;
  for (const auto& lam : out.lambda_paths) q.push_back(cusum_path(lam, 0.0, n_eff));
  out.kappa = kappa_from_paths(q, first_k, c.j_lo, c.j_hi);
  if (want_q0) {
    std::vector<double> values;
    for (const auto& lam : out.lambda_paths) {
      const auto path = cusum_path(lam, out.kappa, n_eff);
      for (std::size_t j = c.j_lo; j <= c.j_hi; ++j) values.push_back(path[j - first_k]);
    }
    out.q0 = quantile_q0(values);
  }
  return out;
}

}  // namespace

double bootstrap_kappa(const ImageSequence& ic_sequence, const BootstrapConfig& cfg, const FitConfig& fit) {
  return run_bootstrap(ic_sequence, cfg, fit, false).kappa;
}

BootstrapCalibration bootstrap_calibrate(const ImageSequence& ic_sequence, const BootstrapConfig& cfg,
                                         const FitConfig& fit) {
  return run_bootstrap(ic_sequence, cfg, fit, true);
}

}  // namespace driftmon
