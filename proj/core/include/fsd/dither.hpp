// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "fsd/image.hpp"

namespace fsd {

/// K uniformly spaced levels {i / (K-1)} per channel, 2 <= K <= 256.
class QuantSpec {
 public:
  explicit QuantSpec(int levels);

  int levels() const noexcept { return levels_; }
  double step() const noexcept { return 1.0 / (levels_ - 1); }
  double level(int i) const noexcept { return static_cast<double>(i) / (levels_ - 1); }
  std::vector<double> grid() const;

  /// Index of the nearest level; exact halfway values go to the higher level.
  /// Values outside [0, 1] saturate to the end levels.
  int nearest_index(double v) const noexcept;
  double quantize(double v) const noexcept { return level(nearest_index(v)); }

 private:
  int levels_;
};

/// One error-diffusion tap, relative to the current pixel in a left-to-right row.
struct DiffusionTap {
  int dy;
  int dx;
  double weight;
};

/// Error-diffusion kernel. Taps must point strictly forward in raster order
/// (dy > 0, or dy == 0 and dx > 0), have positive weights, and sum to 1.
class DiffusionKernel {
 public:
  explicit DiffusionKernel(std::vector<DiffusionTap> taps);

  /// 7/16 right, 3/16 down-left, 5/16 down, 1/16 down-right.
  static DiffusionKernel floyd_steinberg();

  const std::vector<DiffusionTap>& taps() const noexcept { return taps_; }

 private:
  std::vector<DiffusionTap> taps_;
};

/// Serpentine alternates direction per row and mirrors the taps horizontally
/// on right-to-left rows.
enum class ScanOrder { raster, serpentine };

Image quantize_uniform(const Image& img, const QuantSpec& spec);

/// Multi-level error diffusion, channels independent. The accumulated value
/// (input plus diffused error) is never clamped; the quantizer saturates it.
/// Error that would land outside the image is dropped.
Image fs_dither(const Image& img, const QuantSpec& spec, ScanOrder scan = ScanOrder::raster,
                const DiffusionKernel& kernel = DiffusionKernel::floyd_steinberg());

/// fs_dither(to_grayscale(img)). Requires 3 channels.
Image fs_dither_gray(const Image& img, const QuantSpec& spec, ScanOrder scan = ScanOrder::raster,
                     const DiffusionKernel& kernel = DiffusionKernel::floyd_steinberg());

}  // namespace fsd
