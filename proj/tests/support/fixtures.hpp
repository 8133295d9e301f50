// SPDX-License-Identifier: Apache-2.0
// Frozen outputs of oracle::floyd_steinberg for four 4x4 inputs at K=2.
#pragma once

#include <array>
#include <vector>

namespace fsd::fixtures {

struct DitherFixture {
  const char* name;
  std::array<double, 16> input;
  std::array<double, 16> expected;
};

inline std::vector<DitherFixture> dither_4x4_k2() {
  std::array<double, 16> flat{}, ramp{}, checker{}, mixed{};
  const std::array<double, 16> mixed_values = {0.125, 0.875, 0.375, 0.5,   0.625, 0.25, 0.75, 0.0,
                                               1.0,   0.375, 0.125, 0.625, 0.5,   0.875, 0.25, 0.75};
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      const int i = y * 4 + x;
      flat[i] = 0.5;
      ramp[i] = i / 15.0;
      checker[i] = (x + y) % 2 ? 0.75 : 0.25;
      mixed[i] = mixed_values[i];
    }
  }
  return {
      {"flat_half", flat, {1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1}},
      {"ramp", ramp, {0, 0, 0, 0, 0, 1, 0, 1, 1, 0, 1, 1, 1, 1, 1, 1}},
      {"checker_quarter", checker, {0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0}},
      {"mixed_eighths", mixed, {0, 1, 0, 1, 1, 0, 1, 0, 1, 0, 0, 1, 1, 1, 0, 1}},
  };
}

}  // namespace fsd::fixtures
