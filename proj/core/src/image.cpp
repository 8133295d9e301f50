// SPDX-License-Identifier: Apache-2.0
#include "fsd/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fsd/error.hpp"

namespace fsd {
namespace {

void check_dims(int height, int width, int channels) {
  if (height <= 0 || width <= 0) {
    throw DomainError("image dimensions must be positive, got " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  if (channels != 1 && channels != 3) {
    throw DomainError("image must have 1 or 3 channels, got " + std::to_string(channels));
  }
}

std::size_t element_count(int height, int width, int channels) {
  return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
         static_cast<std::size_t>(channels);
}

}  // namespace

Image::Image(int height, int width, int channels, double fill)
    : Image(height, width, channels,
            std::vector<double>(height > 0 && width > 0 && channels > 0
                                    ? element_count(height, width, channels)
                                    : 0,
                                fill)) {}

Image::Image(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != element_count(height, width, channels)) {
    throw DomainError("image data length " + std::to_string(data_.size()) + " does not match " +
                      std::to_string(height) + "x" + std::to_string(width) + "x" +
                      std::to_string(channels));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double v = data_[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("intensity at element " + std::to_string(i) + " is outside [0, 1]");
    }
  }
}

Image Image::clamped(int height, int width, int channels, std::vector<double> data) {
  for (double& v : data) {
    if (!std::isfinite(v)) throw DomainError("non-finite intensity");
    v = std::clamp(v, 0.0, 1.0);
  }
  return Image(height, width, channels, std::move(data));
}

std::vector<double> Image::channel_plane(int c) const {
  std::vector<double> plane(static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_));
  for (std::size_t p = 0; p < plane.size(); ++p) {
    plane[p] = data_[p * static_cast<std::size_t>(channels_) + static_cast<std::size_t>(c)];
  }
  return plane;
}

namespace {

// Builds an out_h x out_w image where pixel (y, x) reads source pixel src(y, x).
template <typename SourceOf>
Image remap(const Image& img, int out_h, int out_w, SourceOf src) {
  const int ch = img.channels();
  std::vector<double> out(img.size());
  std::size_t k = 0;
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const auto [sy, sx] = src(y, x);
      for (int c = 0; c < ch; ++c) out[k++] = img.at(sy, sx, c);
    }
  }
  return Image(out_h, out_w, ch, std::move(out));
}

}  // namespace

Image hflip(const Image& img) {
  const int w = img.width();
  return remap(img, img.height(), w, [w](int y, int x) { return std::pair{y, w - 1 - x}; });
}

Image vflip(const Image& img) {
  const int h = img.height();
  return remap(img, h, img.width(), [h](int y, int x) { return std::pair{h - 1 - y, x}; });
}

Image rotate(const Image& img, int quarter_turns) {
  const int h = img.height();
  const int w = img.width();
  switch (quarter_turns) {
    case 1:  // output is w x h; top row of output is the right column of input
      return remap(img, w, h, [w](int y, int x) { return std::pair{x, w - 1 - y}; });
    case 2:
      return remap(img, h, w, [h, w](int y, int x) { return std::pair{h - 1 - y, w - 1 - x}; });
    case 3:
      return remap(img, w, h, [h](int y, int x) { return std::pair{h - 1 - x, y}; });
    default:
      throw DomainError("rotate: quarter_turns must be 1, 2 or 3, got " +
                        std::to_string(quarter_turns));
  }
}

Image to_grayscale(const Image& img) {
  if (img.channels() != 3) {
    throw DomainError("to_grayscale requires a 3-channel image, got " +
                      std::to_string(img.channels()));
  }
  const std::size_t n = img.size() / 3;
  std::vector<double> out(n);
  const auto d = img.data();
  for (std::size_t p = 0; p < n; ++p) {
    const double luma = 0.299 * d[3 * p] + 0.587 * d[3 * p + 1] + 0.114 * d[3 * p + 2];
    out[p] = std::clamp(luma, 0.0, 1.0);
  }
  return Image(img.height(), img.width(), 1, std::move(out));
}

double linf_distance(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DomainError("linf_distance: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DomainError("psnr: shape mismatch");
  if (a == b) return std::numeric_limits<double>::infinity();
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    sq += d * d;
  }
  const double rmse = std::sqrt(sq / static_cast<double>(a.size()));
  return 20.0 * std::log10(1.0 / rmse);
}

}  // namespace fsd
