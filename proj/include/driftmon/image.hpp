#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace driftmon {

struct Dims {
  std::size_t nx = 0;  // width, pixel index i maps to x
  std::size_t ny = 0;  // height, pixel index j maps to y

  std::size_t pixels() const { return nx * ny; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Lattice coordinate of the 1-based pixel index along an axis of `count`
/// pixels: i / count.
inline double lattice_coord(std::size_t index1, std::size_t count) {
  return static_cast<double>(index1) / static_cast<double>(count);
}

/// Inverse of lattice_coord; exact for every lattice value.
std::size_t lattice_index(double coord, std::size_t count);

/// One grayscale frame w(x_i, y_j, t). Row-major storage: row j-1 holds the
/// pixels with y = y_j, column i-1 holds x = x_i.
class ImageFrame {
 public:
  ImageFrame() = default;
  ImageFrame(Dims dims, double time);
  ImageFrame(Dims dims, double time, std::vector<double> values);

  Dims dims() const { return dims_; }
  std::size_t nx() const { return dims_.nx; }
  std::size_t ny() const { return dims_.ny; }
  std::size_t size() const { return values_.size(); }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  // 0-based column / row access.
  double at(std::size_t col, std::size_t row) const { return values_[row * dims_.nx + col]; }
  double& at(std::size_t col, std::size_t row) { return values_[row * dims_.nx + col]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double x(std::size_t col) const { return lattice_coord(col + 1, dims_.nx); }
  double y(std::size_t row) const { return lattice_coord(row + 1, dims_.ny); }

 private:
  Dims dims_{};
  double time_ = 0.0;
  std::vector<double> values_;
};

/// Frames with uniform dims and strictly increasing times.
class ImageSequence {
 public:
  ImageSequence() = default;
  explicit ImageSequence(std::vector<ImageFrame> frames);

  void push_back(ImageFrame frame);

  std::size_t size() const { return frames_.size(); }
  bool empty() const { return frames_.empty(); }
  Dims dims() const;
  const ImageFrame& operator[](std::size_t k) const { return frames_[k]; }
  ImageFrame& operator[](std::size_t k) { return frames_[k]; }
  const std::vector<ImageFrame>& frames() const { return frames_; }
  std::vector<double> times() const;

  auto begin() const { return frames_.begin(); }
  auto end() const { return frames_.end(); }

  /// Frames [first, first + count) as a new sequence.
  ImageSequence slice(std::size_t first, std::size_t count) const;

 private:
  std::vector<ImageFrame> frames_;
};

struct LatticePoint {
  double x = 0.0;
  double y = 0.0;
  double t_scaled = 0.0;
  double intensity = 0.0;
};

}  // namespace driftmon
