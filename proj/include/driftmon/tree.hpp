#pragma once

#include <cstddef>
#include <vector>

#include "driftmon/image.hpp"
#include "driftmon/split_rule.hpp"

namespace driftmon {

/// Affine map from sequence time to the split-space time coordinate:
/// t_scaled = (t - offset) * scale.
struct TimeMap {
  double offset = 0.0;
  double scale = 1.0;

  double operator()(double t) const { return (t - offset) * scale; }

  /// First window time -> 0, last -> time_scale.
  static TimeMap for_window(double t_first, double t_last, double time_scale);
};

struct TreeNode {
  SplitRule rule{};       // meaningful for internal nodes only
  int left = -1;
  int right = -1;
  int leaf_id = -1;       // >= 0 exactly for leaves
  int depth = 0;
  double mean = 0.0;      // training mean of the node
  double sse = 0.0;       // training SSE about the node mean
  std::size_t count = 0;  // training points

  bool is_leaf() const { return left < 0; }
};

/// Binary oblique tree. nodes()[0] is the root; leaf ids are assigned
/// 0..L-1 in depth-first (left before right) order.
class FittedTree {
 public:
  FittedTree() = default;
  FittedTree(std::vector<TreeNode> nodes, TimeMap time_map, Dims dims);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TimeMap& time_map() const { return time_map_; }
  Dims dims() const { return dims_; }
  std::size_t leaf_count() const { return leaf_count_; }
  int depth() const;

  /// Leaf id reached by (x, y, t_scaled).
  int route(double x, double y, double t_scaled) const;
  const TreeNode& leaf(int leaf_id) const { return nodes_[leaf_nodes_[static_cast<std::size_t>(leaf_id)]]; }

  /// Sum of leaf SSEs (total training SSE).
  double training_sse() const;
  /// Training SSE of the tree truncated at `max_depth`.
  double training_sse_at_depth(int max_depth) const;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<std::size_t> leaf_nodes_;
  TimeMap time_map_{};
  Dims dims_{};
  std::size_t leaf_count_ = 0;
};

}  // namespace driftmon
