#include "driftmon/image.hpp"

#include <cmath>
#include <string>

#include "driftmon/error.hpp"

namespace driftmon {

std::size_t lattice_index(double coord, std::size_t count) {
  return static_cast<std::size_t>(std::llround(coord * static_cast<double>(count)));
}

ImageFrame::ImageFrame(Dims dims, double time)
    : ImageFrame(dims, time, std::vector<double>(dims.pixels(), 0.0)) {}

ImageFrame::ImageFrame(Dims dims, double time, std::vector<double> values)
    : dims_(dims), time_(time), values_(std::move(values)) {
  if (dims.nx < 2 || dims.ny < 2)
    throw PreconditionError("frame dims must be at least 2x2");
  if (values_.size() != dims.pixels())
    throw PreconditionError("frame value count does not match dims");
  if (!std::isfinite(time)) throw PreconditionError("frame time must be finite");
  for (double v : values_)
    if (!std::isfinite(v)) throw PreconditionError("frame intensities must be finite");
}

ImageSequence::ImageSequence(std::vector<ImageFrame> frames) {
  frames_.reserve(frames.size());
  for (auto& f : frames) push_back(std::move(f));
}

void ImageSequence::push_back(ImageFrame frame) {
  if (!frames_.empty()) {
    if (frame.dims() != frames_.front().dims())
      throw PreconditionError("mixed resolutions in image sequence");
    if (!(frame.time() > frames_.back().time()))
      throw PreconditionError("sequence times must be strictly increasing (t=" +
                              std::to_string(frame.time()) + ")");
  }
  frames_.push_back(std::move(frame));
}

Dims ImageSequence::dims() const { return frames_.empty() ? Dims{} : frames_.front().dims(); }

std::vector<double> ImageSequence::times() const {
  std::vector<double> out;
  out.reserve(frames_.size());
  for (const auto& f : frames_) out.push_back(f.time());
  return out;
}

ImageSequence ImageSequence::slice(std::size_t first, std::size_t count) const {
  if (first + count > frames_.size()) throw PreconditionError("slice out of range");
  ImageSequence out;
  out.frames_.assign(frames_.begin() + static_cast<std::ptrdiff_t>(first),
                     frames_.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

}  // namespace driftmon
