#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>

#include "driftmon/image.hpp"

namespace driftmon {

/// Intensity interval that raw PGM values 0..maxval are mapped onto.
struct IntensityRange {
  double lo = 0.0;
  double hi = 1.0;
  void validate() const;
};

/// Parses "lo,hi".
IntensityRange parse_intensity_range(const std::string& text);

/// Reads a binary P5 PGM (maxval up to 65535, 16-bit samples big-endian).
ImageFrame read_pgm(const std::filesystem::path& path, double time, IntensityRange range = {});

/// Writes a P5 PGM at 8 or 16 bits. Values are clamped to the range and
/// quantized by rounding half up.
void write_pgm(const std::filesystem::path& path, const ImageFrame& frame, int bit_depth, IntensityRange range = {});

/// Loads the frames listed in a `filename,time` manifest (paths relative to
/// the manifest), sorted by time.
ImageSequence load_sequence(const std::filesystem::path& manifest, IntensityRange range = {});

/// Writes frame_0001.pgm, ... and manifest.csv into `dir`; returns the
/// manifest path.
std::filesystem::path save_sequence(const ImageSequence& seq, const std::filesystem::path& dir, int bit_depth,
                                    IntensityRange range = {});

/// Bilinear resampling to new_n x new_n on pixel centers.
ImageFrame resize_frame(const ImageFrame& frame, std::size_t new_n);

/// Frames at `target_times` (strictly increasing, inside the observed time
/// span). Observed times pass through; others interpolate linearly between
/// the closest observed frames on either side.
ImageSequence impute_missing(const ImageSequence& seq, std::span<const double> target_times);

/// One affine map for the whole sequence sending its global min to 0 and
/// global max to 1.
ImageSequence scale_intensities(const ImageSequence& seq);

}  // namespace driftmon
