#include "driftmon/simgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "driftmon/error.hpp"

namespace driftmon {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double indicator(bool b) { return b ? 1.0 : 0.0; }

}  // namespace

Scenario parse_scenario(const std::string& s) {
  const std::string l = lower(s);
  if (l == "s1") return Scenario::S1;
  if (l == "s2") return Scenario::S2;
  if (l == "s3") return Scenario::S3;
  if (l == "s4") return Scenario::S4;
  if (l == "s5") return Scenario::S5;
  throw PreconditionError("unknown scenario '" + s + "' (expected s1..s5)");
}

Regime parse_regime(const std::string& s) {
  const std::string l = lower(s);
  if (l == "ic") return Regime::IC;
  if (l == "oc") return Regime::OC;
  throw PreconditionError("unknown regime '" + s + "' (expected ic or oc)");
}

std::string to_string(Scenario s) { return "s" + std::to_string(static_cast<int>(s) + 1); }
std::string to_string(Regime r) { return r == Regime::IC ? "ic" : "oc"; }

double default_kappa(Scenario s) {
  switch (s) {
    case Scenario::S1: return 0.9;
    case Scenario::S2: return 2.0;
    case Scenario::S3: return 0.7;
    case Scenario::S4: return 2.0;
    case Scenario::S5: return 0.7;
  }
  return 0.9;
}

void ScenarioSpec::validate() const {
  if (n < 2) throw PreconditionError("scenario resolution must be >= 2");
  if (!(sigma >= 0.0)) throw PreconditionError("sigma must be >= 0");
  if (horizon < 1) throw PreconditionError("horizon must be >= 1");
  if (!std::isfinite(change_time)) throw PreconditionError("change_time must be finite");
}

double true_intensity(const ScenarioSpec& spec, double x, double y, double t) {
  const double n = static_cast<double>(spec.n);
  const bool oc = spec.regime == Regime::OC;
  const bool after = oc && t > spec.change_time;
  // Doubled drift after the change: t + t * 1(t > change).
  const double drift_t = t + (after ? t : 0.0);
  switch (spec.scenario) {
    case Scenario::S1:
      return indicator(x > drift_t / n);
    case Scenario::S2:
      return indicator(std::max(std::abs(x - 0.5), std::abs(y - 0.5)) > (20.0 + drift_t) / (4.0 * n));
    case Scenario::S3:
      return indicator(std::max(std::abs(x - drift_t / (2.0 * n)), std::abs(y - 0.5)) > 5.0 / n);
    case Scenario::S4: {
      const double grow = after ? 5.0 / n : 0.0;
      const double lo = 0.25 - grow;
      const double hi = 0.75 + grow;
      const bool inside = x >= lo && x <= hi && y >= lo && y <= hi;
      return indicator(!inside);
    }
    case Scenario::S5: {
      const double level = t * spec.alpha * (after ? 2.0 : 1.0);
      return level + (spec.beta - t * spec.alpha) * indicator(std::max(x, y) > (n - 14.0) / n);
    }
  }
  throw PreconditionError("unknown scenario");
}

ImageFrame generate_frame(const ScenarioSpec& spec, std::size_t index) {
  spec.validate();
  const Dims dims{spec.n, spec.n};
  const double t = static_cast<double>(index + 1);
  Rng rng = seed_rng(spec.seed).substream(static_cast<std::uint64_t>(index + 1));
  ImageFrame frame(dims, t);
  for (std::size_t r = 0; r < dims.ny; ++r) {
    for (std::size_t c = 0; c < dims.nx; ++c) {
      const double f = true_intensity(spec, frame.x(c), frame.y(r), t);
      const double e = rng.normal();
      frame.at(c, r) = f + spec.sigma * e;
    }
  }
  return frame;
}

ImageSequence generate_sequence(const ScenarioSpec& spec) {
  spec.validate();
  ImageSequence seq;
  for (std::size_t k = 0; k < spec.horizon; ++k) seq.push_back(generate_frame(spec, k));
  return seq;
}

}  // namespace driftmon
