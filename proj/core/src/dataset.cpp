// SPDX-License-Identifier: Apache-2.0
#include "fsd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fsd/error.hpp"
#include "fsd/rng.hpp"

namespace fsd {

void Appearance::validate() const {
  if (!(noise >= 0.0 && noise <= 1.0)) throw DomainError("dataset noise must be in [0, 1]");
  if (palette_levels != 0 && (palette_levels < 2 || palette_levels > 256)) {
    throw DomainError("dataset palette_levels must be 0 or in [2, 256]");
  }
  if (!(min_contrast >= 0.0 && min_contrast <= max_contrast && max_contrast <= 1.0)) {
    throw DomainError("dataset contrast range must satisfy 0 <= min <= max <= 1");
  }
  // Every admissible pair must be reachable, or colour drawing never ends.
  if (palette_levels != 0) {
    bool reachable = false;
    for (int i = 1; i <= 3 * (palette_levels - 1) && !reachable; ++i) {
      const double d = static_cast<double>(i) / (3.0 * (palette_levels - 1));
      reachable = d >= min_contrast && d <= max_contrast;
    }
    if (!reachable) throw DomainError("dataset contrast range admits no palette colour pair");
  } else if (max_contrast - min_contrast < 1e-3 || min_contrast > 0.9) {
    throw DomainError("dataset contrast range too narrow for continuous colours");
  }
  if (!(texture >= 0.0 && texture <= 0.5)) throw DomainError("dataset texture must be in [0, 0.5]");
  if (!(impulse >= 0.0 && impulse <= 1.0)) throw DomainError("dataset impulse must be in [0, 1]");
}

void DatasetParams::validate() const {
  if (size < 16) throw DomainError("dataset image size must be >= 16");
  if (block_split < 1 || size % block_split != 0) {
    throw DomainError("dataset image size " + std::to_string(size) +
                      " is not divisible by the block split " + std::to_string(block_split));
  }
  if (count < 0) throw DomainError("dataset count must be >= 0");
  appearance.validate();
}

namespace {

using Rgb = std::array<double, 3>;

constexpr int kStripePeriod = 16;
constexpr int kCheckerCell = 8;
constexpr double kDiskJitter = 2.0;
constexpr std::uint64_t kTextureSalt = 0x7e57;

double palette_value(const Appearance& a, Rng& rng) {
  if (a.palette_levels == 0) return rng.uniform();
  return static_cast<double>(rng.below(static_cast<std::uint64_t>(a.palette_levels))) / (a.palette_levels - 1);
}

std::pair<Rgb, Rgb> contrasting_colors(const Appearance& a, Rng& rng) {
  for (;;) {
    Rgb fg{palette_value(a, rng), palette_value(a, rng), palette_value(a, rng)};
    Rgb bg{palette_value(a, rng), palette_value(a, rng), palette_value(a, rng)};
    const double diff = (std::abs(fg[0] - bg[0]) + std::abs(fg[1] - bg[1]) + std::abs(fg[2] - bg[2])) / 3.0;
    if (diff >= a.min_contrast && diff <= a.max_contrast) return {fg, bg};
  }
}

// Sign of the class texture at one element; the same for every image of a
// class regardless of the dataset seed.
double texture_sign(int label, std::size_t element) {
  const auto h = derive_seed(kTextureSalt, {static_cast<std::uint64_t>(label), element});
  return (h & 1) ? 1.0 : -1.0;
}

Image render(int label, int size, const Appearance& a, Rng& rng) {
  const auto [fg, bg] = contrasting_colors(a, rng);
  std::vector<bool> mask(static_cast<std::size_t>(size) * size);
  switch (label) {
    case 0:
    case 1: {  // stripes
      const int phase = static_cast<int>(rng.below(kStripePeriod));
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const int t = (label == 0 ? y : x) + phase;
          mask[static_cast<std::size_t>(y) * size + x] = (t % kStripePeriod) < kStripePeriod / 2;
        }
      }
      break;
    }
    case 2: {  // checkerboard
      const int oy = static_cast<int>(rng.below(kCheckerCell));
      const int ox = static_cast<int>(rng.below(kCheckerCell));
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          mask[static_cast<std::size_t>(y) * size + x] =
              (((y + oy) / kCheckerCell) + ((x + ox) / kCheckerCell)) % 2 == 0;
        }
      }
      break;
    }
    default: {  // disk
      const double r = rng.uniform(0.2, 0.38) * size;
      const double cy = size / 2.0 + rng.uniform(-kDiskJitter, kDiskJitter);
      const double cx = size / 2.0 + rng.uniform(-kDiskJitter, kDiskJitter);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double dy = y + 0.5 - cy;
          const double dx = x + 0.5 - cx;
          mask[static_cast<std::size_t>(y) * size + x] = dy * dy + dx * dx <= r * r;
        }
      }
      break;
    }
  }

  std::vector<double> data(static_cast<std::size_t>(size) * size * 3);
  for (std::size_t p = 0; p < mask.size(); ++p) {
    const Rgb& col = mask[p] ? fg : bg;
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t e = p * 3 + c;
      double v = col[c];
      if (a.impulse > 0.0 && rng.uniform() < a.impulse) v = palette_value(a, rng);
      if (a.noise > 0.0) v += rng.uniform(-a.noise, a.noise);
      if (a.texture > 0.0) v += a.texture * texture_sign(label, e);
      data[e] = std::clamp(v, 0.0, 1.0);
    }
  }
  return Image(size, size, 3, std::move(data));
}

}  // namespace

SyntheticDataset generate_dataset(const DatasetParams& params) {
  params.validate();
  SyntheticDataset ds;
  ds.params = params;
  ds.class_names.assign(kSyntheticClassNames.begin(), kSyntheticClassNames.end());
  ds.images.reserve(static_cast<std::size_t>(params.count));
  ds.labels.reserve(static_cast<std::size_t>(params.count));
  for (int i = 0; i < params.count; ++i) {
    const int label = i % kSyntheticClasses;
    Rng rng(derive_seed(params.seed, {static_cast<std::uint64_t>(i)}));
    ds.images.push_back(render(label, params.size, params.appearance, rng));
    ds.labels.push_back(label);
  }
  return ds;
}

DataSplits generate_splits(const SplitParams& p) {
  auto make = [&](int count, std::uint64_t salt) {
    DatasetParams d;
    d.size = p.size;
    d.count = count;
    d.appearance = p.appearance;
    d.seed = derive_seed(p.seed, {salt});
    d.block_split = p.block_split;
    return generate_dataset(d);
  };
  return {make(p.train, 1), make(p.eval, 2), make(p.queries, 3)};
}

}  // namespace fsd
