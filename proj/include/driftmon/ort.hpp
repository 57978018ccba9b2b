#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "driftmon/image.hpp"
#include "driftmon/split_rule.hpp"
#include "driftmon/tree.hpp"

namespace driftmon {

/// Oblique regression tree settings.
///
/// Candidate directions are the three coordinate axes, then a Fibonacci grid
/// on the canonical half-sphere (n_grid_directions counts the axes, so 3
/// means axis-aligned only), then n_random_directions seeded uniform
/// directions. The best candidate is polished by a pattern search on the
/// sphere unless refine_min_step is 0.
struct FitConfig {
  /// Per-point SSE reduction a split must exceed. Unset: resolved at fit time
  /// as 0.25 * var(root) / log(N).
  std::optional<double> gain_cutoff;
  std::size_t min_leaf = 8;
  int max_depth = 30;
  std::size_t n_grid_directions = 64;
  std::size_t n_random_directions = 0;
  double time_scale = 1.0;
  std::uint64_t seed = 0;

  /// Pattern search: start step in radians (0 = half the grid spacing),
  /// stop once the step falls below refine_min_step.
  double refine_initial_step = 0.0;
  double refine_min_step = 1e-3;
  std::size_t refine_max_evals = 200;
  /// Refine only when the grid's best gain exceeds refine_gate * cutoff.
  double refine_gate = 1.0;

  void validate() const;
  bool refinement_enabled() const { return refine_min_step > 0.0; }

  /// Axis-aligned candidates only, no refinement.
  static FitConfig axis_aligned();
};

/// Cutoff 0.25 * theta^2 used when a noise estimate is available.
double cutoff_from_noise(double theta_sq);
/// Fallback cutoff 0.25 * sample variance / log(N).
double fallback_cutoff(std::span<const double> intensities);

/// Candidate directions in evaluation (= tie-break) order.
std::vector<Vec3> candidate_directions(const FitConfig& cfg);

/// Per-point SSE reduction (1/|N|)[SSE(N) - SSE(N_L) - SSE(N_R)], each SSE
/// about its own mean. An empty child gives 0. Requires >= 2 points.
double impurity_gain(std::span<const LatticePoint> node, const SplitRule& rule);

struct SplitCandidate {
  SplitRule rule;
  double gain = 0.0;
  /// Index into candidate_directions(cfg); indices past the end are
  /// refinement evaluations.
  std::size_t direction_index = 0;
};

/// Gain comparison shared by the search and its oracles: `gain` wins only if
/// it beats `best` by more than a 1e-12 relative margin, so near-equal gains
/// fall back to the (direction index, smallest c) order.
bool gain_improves(double gain, double best);

/// Best feasible split of a node (both children >= min_leaf), thresholds at
/// midpoints between consecutive distinct projections. Ties go to the lowest
/// direction index, then the smallest c. Requires >= 2 * min_leaf points.
std::optional<SplitCandidate> best_split(std::span<const LatticePoint> node, const FitConfig& cfg);

/// Recursive greedy fit over all pixels of the window. Window times map to
/// [0, time_scale].
FittedTree fit_tree(const ImageSequence& window, const FitConfig& cfg);

/// Lattice points of a window under the tree's time map convention.
std::vector<LatticePoint> window_points(const ImageSequence& window, double time_scale);

}  // namespace driftmon
