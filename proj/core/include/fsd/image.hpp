// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fsd {

/// H x W x C image with intensities in [0, 1], stored row-major with
/// interleaved channels: index = (y * W + x) * C + c.
///
/// Construction validates every invariant, so a live Image is always
/// well-formed. Channel count is 1 (gray) or 3 (RGB).
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);
  Image(int height, int width, int channels, std::vector<double> data);

  /// Builds an image from arbitrary reals, clamping each value into [0, 1].
  /// Non-finite values are rejected.
  static Image clamped(int height, int width, int channels, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> data() const noexcept { return data_; }
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }
  double at(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  /// Extracts one channel as a dense H*W plane.
  std::vector<double> channel_plane(int c) const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<double> data_;
};

Image hflip(const Image& img);
Image vflip(const Image& img);

/// Counter-clockwise rotation by 90 degrees per quarter turn.
/// quarter_turns must be 1, 2 or 3.
Image rotate(const Image& img, int quarter_turns);

/// Luma 0.299 R + 0.587 G + 0.114 B. Requires a 3-channel image.
Image to_grayscale(const Image& img);

/// Peak signal-to-noise ratio on the unit scale; +infinity for identical images.
double psnr(const Image& a, const Image& b);

/// max_i |a_i - b_i|
double linf_distance(const Image& a, const Image& b);

}  // namespace fsd
