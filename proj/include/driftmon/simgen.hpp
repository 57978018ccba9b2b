#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "driftmon/image.hpp"
#include "driftmon/rng.hpp"

namespace driftmon {

enum class Scenario { S1, S2, S3, S4, S5 };
enum class Regime { IC, OC };

Scenario parse_scenario(const std::string& s);  // "s1".."s5", case-insensitive
Regime parse_regime(const std::string& s);      // "ic" | "oc"
std::string to_string(Scenario s);
std::string to_string(Regime r);

/// Allowance used for each scenario's chart by default: 0.9, 2.0, 0.7, 2.0, 0.7.
double default_kappa(Scenario s);

/// One of the five drift scenarios. Pixel-unit constants of the 128x128
/// originals (drift rates, offsets, the 5-pixel half-width, the 14-pixel
/// band) are kept in pixels at other resolutions.
struct ScenarioSpec {
  Scenario scenario = Scenario::S1;
  std::size_t n = 128;
  double sigma = 0.15;
  double change_time = 20.0;
  Regime regime = Regime::IC;
  std::size_t horizon = 60;
  double alpha = 0.005;  // S5 intensity rate
  double beta = 1.0;     // S5 starting outside intensity
  std::uint64_t seed = 0;

  void validate() const;
};

/// Noiseless intensity f(x, y, t) of the scenario and regime.
double true_intensity(const ScenarioSpec& spec, double x, double y, double t);

/// Frame at time t = index + 1: f plus i.i.d. N(0, sigma^2) noise drawn from
/// the substream keyed by t, so IC and OC share noise for the same seed.
ImageFrame generate_frame(const ScenarioSpec& spec, std::size_t index);

/// Frames at t = 1..horizon.
ImageSequence generate_sequence(const ScenarioSpec& spec);

}  // namespace driftmon
