// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fsd/image.hpp"

namespace fsd {

inline constexpr int kSyntheticClasses = 4;
inline constexpr std::array<const char*, kSyntheticClasses> kSyntheticClassNames = {
    "h_stripes", "v_stripes", "checker", "disk"};

/// How images look, independent of how many there are.
struct Appearance {
  double noise = 0.0;      // additive uniform noise amplitude
  int palette_levels = 3;  // colours drawn from {i/(L-1)}; 0 draws them uniformly
  double min_contrast = 0.1;  // bounds on the mean per-channel fg/bg difference
  double max_contrast = 0.4;
  // Faint class-keyed +/- pattern. It is fully predictive but smaller than
  // the acceptance attack budget, so a model that leans on it is easy to
  // fool while a coarse requantization wipes it out.
  double texture = 0.03;
  double impulse = 0.05;  // per-element probability of a random palette value

  void validate() const;
};

struct DatasetParams {
  int size = 32;
  int count = 400;
  Appearance appearance;
  std::uint64_t seed = 1;
  int block_split = 4;  // size must divide evenly for block-wise SIA

  void validate() const;
};

/// Balanced four-class toy set: horizontal stripes (period 16, random
/// phase), vertical stripes, checkerboard (cell 8, random offset), filled
/// disk (random radius, centre within 2 px of the middle). Each image draws
/// its geometry, colours and corruption from a seed derived from
/// (params.seed, index), so image i does not depend on the other images.
struct SyntheticDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  DatasetParams params;
};

SyntheticDataset generate_dataset(const DatasetParams& params);

/// Train / eval / retrieval-query splits, each generated from its own
/// derived seed.
struct SplitParams {
  int size = 32;
  int train = 400;
  int eval = 200;
  int queries = 32;
  Appearance appearance;
  std::uint64_t seed = 1;
  int block_split = 4;
};

struct DataSplits {
  SyntheticDataset train;
  SyntheticDataset eval;
  SyntheticDataset queries;
};

DataSplits generate_splits(const SplitParams& params);

}  // namespace fsd
