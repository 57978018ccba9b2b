#pragma once

#include <cstddef>
#include <vector>

#include "driftmon/image.hpp"
#include "driftmon/ort.hpp"
#include "driftmon/tree.hpp"

namespace driftmon {

/// Leaf assignment of every pixel of a frame at one query time.
struct PredictedPartition {
  Dims dims{};
  std::vector<int> leaf_of_pixel;  // row-major, same layout as ImageFrame
  std::size_t nonempty_leaf_count = 0;  // K

  int leaf(std::size_t col, std::size_t row) const { return leaf_of_pixel[row * dims.nx + col]; }
};

/// Routes each pixel (x_i, y_j, time_map(t_query)) down the tree.
PredictedPartition partition_at(const FittedTree& tree, Dims dims, double t_query);

/// Leaf-only averaging: each pixel becomes the mean of the frame's own
/// observed intensities over the pixels sharing its predicted leaf.
ImageFrame denoise_frame(const ImageFrame& frame, const PredictedPartition& partition);

/// Retrospective denoiser: fit on the whole window, partition frame k at its
/// own time, leaf-average it.
ImageFrame denoise_in_window(const ImageSequence& window, const FitConfig& cfg, std::size_t k);

}  // namespace driftmon
