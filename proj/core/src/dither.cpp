// SPDX-License-Identifier: Apache-2.0
#include "fsd/dither.hpp"

#include <cmath>
#include <string>

#include "fsd/error.hpp"

namespace fsd {

QuantSpec::QuantSpec(int levels) : levels_(levels) {
  if (levels < 2 || levels > 256) {
    throw DomainError("quantization levels must be in [2, 256], got " + std::to_string(levels));
  }
}

std::vector<double> QuantSpec::grid() const {
  std::vector<double> g(static_cast<std::size_t>(levels_));
  for (int i = 0; i < levels_; ++i) g[static_cast<std::size_t>(i)] = level(i);
  return g;
}

int QuantSpec::nearest_index(double v) const noexcept {
  if (!(v > 0.0)) return 0;  // also maps NaN to the bottom level
  if (v >= 1.0) return levels_ - 1;
  const double scaled = v * (levels_ - 1);
  int i = static_cast<int>(std::floor(scaled));
  // Decide between i and i+1 on the actual level values so that the tie rule
  // holds for the representable grid, not for the scaled approximation.
  if (i + 1 <= levels_ - 1) {
    const double below = v - level(i);
    const double above = level(i + 1) - v;
    if (above <= below) ++i;
  }
  if (i > 0) {
    const double below = v - level(i - 1);
    const double here = level(i) - v;
    if (here > 0.0 && below < here) --i;
  }
  return i;
}

DiffusionKernel::DiffusionKernel(std::vector<DiffusionTap> taps) : taps_(std::move(taps)) {
  if (taps_.empty()) throw DomainError("diffusion kernel needs at least one tap");
  double sum = 0.0;
  for (const auto& t : taps_) {
    if (!(t.dy > 0 || (t.dy == 0 && t.dx > 0))) {
      throw DomainError("diffusion tap (" + std::to_string(t.dy) + "," + std::to_string(t.dx) +
                        ") does not point at an unvisited pixel");
    }
    if (!(t.weight > 0.0)) throw DomainError("diffusion tap weights must be positive");
    sum += t.weight;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw DomainError("diffusion tap weights must sum to 1");
}

DiffusionKernel DiffusionKernel::floyd_steinberg() {
  return DiffusionKernel({{0, 1, 7.0 / 16.0}, {1, -1, 3.0 / 16.0}, {1, 0, 5.0 / 16.0}, {1, 1, 1.0 / 16.0}});
}

Image quantize_uniform(const Image& img, const QuantSpec& spec) {
  std::vector<double> out(img.data().begin(), img.data().end());
  for (double& v : out) v = spec.quantize(v);
  return Image(img.height(), img.width(), img.channels(), std::move(out));
}

Image fs_dither(const Image& img, const QuantSpec& spec, ScanOrder scan,
                const DiffusionKernel& kernel) {
  const int h = img.height();
  const int w = img.width();
  const int ch = img.channels();
  std::vector<double> out(img.size());
  std::vector<double> acc;

  for (int c = 0; c < ch; ++c) {
    acc = img.channel_plane(c);
    for (int y = 0; y < h; ++y) {
      const bool reversed = scan == ScanOrder::serpentine && (y % 2 == 1);
      const int dir = reversed ? -1 : 1;
      for (int step = 0; step < w; ++step) {
        const int x = reversed ? w - 1 - step : step;
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        const double value = acc[p];
        const double q = spec.quantize(value);
        out[p * ch + c] = q;
        const double err = value - q;
        if (err == 0.0) continue;
        for (const auto& tap : kernel.taps()) {
          const int ny = y + tap.dy;
          const int nx = x + dir * tap.dx;
          if (ny >= h || nx < 0 || nx >= w) continue;
          acc[static_cast<std::size_t>(ny) * w + nx] += err * tap.weight;
        }
      }
    }
  }
  return Image(h, w, ch, std::move(out));
}

Image fs_dither_gray(const Image& img, const QuantSpec& spec, ScanOrder scan,
                     const DiffusionKernel& kernel) {
  return fs_dither(to_grayscale(img), spec, scan, kernel);
}

}  // namespace fsd
