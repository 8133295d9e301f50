// SPDX-License-Identifier: Apache-2.0
#include "fsd/filters.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fsd/error.hpp"

namespace fsd {

void BlurSpec::validate() const {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw DomainError("blur kernel size must be odd and >= 1, got " + std::to_string(kernel_size));
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("blur sigma must be positive");
}

std::vector<double> gaussian_kernel(const BlurSpec& spec) {
  spec.validate();
  const int radius = spec.kernel_size / 2;
  std::vector<double> w(static_cast<std::size_t>(spec.kernel_size));
  const double denom = 2.0 * spec.sigma * spec.sigma;
  for (int t = -radius; t <= radius; ++t) {
    w[static_cast<std::size_t>(t + radius)] = std::exp(-static_cast<double>(t) * t / denom);
  }
  // Sum symmetric pairs outward-in so w[t] and w[-t] stay bit-identical.
  double z = w[static_cast<std::size_t>(radius)];
  for (int t = 1; t <= radius; ++t) z += 2.0 * w[static_cast<std::size_t>(radius + t)];
  for (double& v : w) v /= z;
  return w;
}

Image gaussian_blur(const Image& img, const BlurSpec& spec) {
  const auto kernel = gaussian_kernel(spec);
  const int radius = spec.kernel_size / 2;
  const int h = img.height();
  const int w = img.width();
  const int ch = img.channels();
  const auto src = img.data();
  // Taps are symmetric; summing mirrored pairs makes the result invariant
  // under flips of the image, bit for bit.
  const double center = kernel[static_cast<std::size_t>(radius)];
  const double* side = kernel.data() + radius;

  std::vector<double> tmp(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = center * src[img.index(y, x, c)];
        for (int t = 1; t <= radius; ++t) {
          const int left = std::max(x - t, 0);
          const int right = std::min(x + t, w - 1);
          s += side[t] * (src[img.index(y, left, c)] + src[img.index(y, right, c)]);
        }
        tmp[img.index(y, x, c)] = s;
      }
    }
  }

  std::vector<double> out(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = center * tmp[img.index(y, x, c)];
        for (int t = 1; t <= radius; ++t) {
          const int up = std::max(y - t, 0);
          const int down = std::min(y + t, h - 1);
          s += side[t] * (tmp[img.index(up, x, c)] + tmp[img.index(down, x, c)]);
        }
        out[img.index(y, x, c)] = s;
      }
    }
  }
  return Image::clamped(h, w, ch, std::move(out));
}

}  // namespace fsd
