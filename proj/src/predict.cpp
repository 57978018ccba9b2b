#include "driftmon/predict.hpp"

#include <algorithm>
#include <cmath>

#include "driftmon/error.hpp"
#include "driftmon/stats.hpp"

namespace driftmon {

PredictedPartition partition_at(const FittedTree& tree, Dims dims, double t_query) {
  if (dims.nx < 2 || dims.ny < 2) throw PreconditionError("partition dims must be at least 2x2");
  if (dims != tree.dims()) throw PreconditionError("partition dims do not match the fitted lattice");
  const double ts = tree.time_map()(t_query);
  if (!std::isfinite(ts)) throw PreconditionError("query time maps to a non-finite split coordinate");
  PredictedPartition p;
  p.dims = dims;
  p.leaf_of_pixel.resize(dims.pixels());
  std::vector<char> seen(tree.leaf_count(), 0);
  for (std::size_t r = 0; r < dims.ny; ++r) {
    const double y = lattice_coord(r + 1, dims.ny);
    for (std::size_t c = 0; c < dims.nx; ++c) {
      const int leaf = tree.route(lattice_coord(c + 1, dims.nx), y, ts);
      p.leaf_of_pixel[r * dims.nx + c] = leaf;
      if (!seen[static_cast<std::size_t>(leaf)]) {
        seen[static_cast<std::size_t>(leaf)] = 1;
        ++p.nonempty_leaf_count;
      }
    }
  }
  return p;
}

ImageFrame denoise_frame(const ImageFrame& frame, const PredictedPartition& partition) {
  if (frame.dims() != partition.dims) throw PreconditionError("frame dims do not match partition");
  int leaves = 0;
  for (int l : partition.leaf_of_pixel) leaves = std::max(leaves, l + 1);
  std::vector<CompensatedSum> sums(static_cast<std::size_t>(leaves));
  std::vector<std::size_t> counts(static_cast<std::size_t>(leaves), 0);
  auto in = frame.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto l = static_cast<std::size_t>(partition.leaf_of_pixel[i]);
    sums[l].add(in[i]);
    ++counts[l];
  }
  std::vector<double> means(static_cast<std::size_t>(leaves), 0.0);
  for (std::size_t l = 0; l < means.size(); ++l)
    if (counts[l] > 0) means[l] = sums[l].value() / static_cast<double>(counts[l]);
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] = means[static_cast<std::size_t>(partition.leaf_of_pixel[i])];
  return ImageFrame(frame.dims(), frame.time(), std::move(out));
}

ImageFrame denoise_in_window(const ImageSequence& window, const FitConfig& cfg, std::size_t k) {
  if (k >= window.size()) throw PreconditionError("frame index outside the window");
  const FittedTree tree = fit_tree(window, cfg);
  return denoise_frame(window[k], partition_at(tree, window.dims(), window[k].time()));
}

}  // namespace driftmon
