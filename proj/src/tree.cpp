#include "driftmon/tree.hpp"

#include <algorithm>

#include "driftmon/error.hpp"

namespace driftmon {

TimeMap TimeMap::for_window(double t_first, double t_last, double time_scale) {
  if (!(t_last > t_first)) throw PreconditionError("time map needs t_last > t_first");
  return TimeMap{t_first, time_scale / (t_last - t_first)};
}

FittedTree::FittedTree(std::vector<TreeNode> nodes, TimeMap time_map, Dims dims)
    : nodes_(std::move(nodes)), time_map_(time_map), dims_(dims) {
  if (nodes_.empty()) throw PreconditionError("tree needs a root node");
  // Assign leaf ids depth-first.
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    TreeNode& n = nodes_[i];
    if (n.is_leaf()) {
      n.leaf_id = static_cast<int>(leaf_nodes_.size());
      leaf_nodes_.push_back(i);
    } else {
      stack.push_back(static_cast<std::size_t>(n.right));
      stack.push_back(static_cast<std::size_t>(n.left));
    }
  }
  leaf_count_ = leaf_nodes_.size();
}

int FittedTree::depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

int FittedTree::route(double x, double y, double t_scaled) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const TreeNode& n = nodes_[i];
    i = static_cast<std::size_t>(n.rule.goes_left(x, y, t_scaled) ? n.left : n.right);
  }
  return nodes_[i].leaf_id;
}

double FittedTree::training_sse() const {
  double s = 0.0;
  for (std::size_t i : leaf_nodes_) s += nodes_[i].sse;
  return s;
}

double FittedTree::training_sse_at_depth(int max_depth) const {
  double s = 0.0;
  for (const auto& n : nodes_)
    if (n.depth == max_depth ? true : (n.depth < max_depth && n.is_leaf())) s += n.sse;
  return s;
}

}  // namespace driftmon
