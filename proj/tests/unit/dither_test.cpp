// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "fsd/dither.hpp"
#include "fsd/error.hpp"

namespace fsd {
namespace {

bool on_grid(double v, int k) {
  const double scaled = v * (k - 1);
  return scaled == std::round(scaled) && QuantSpec(k).level(static_cast<int>(std::round(scaled))) == v;
}

double mean(const Image& img) {
  const auto d = img.data();
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

TEST(Dither, QuantizerExamples) {
  EXPECT_EQ(QuantSpec(2).quantize(0.4), 0.0);
  EXPECT_EQ(QuantSpec(3).quantize(0.6), 0.5);
  EXPECT_EQ(QuantSpec(2).quantize(0.5), 1.0);
  EXPECT_EQ(QuantSpec(3).quantize(0.75), 1.0);
  EXPECT_EQ(QuantSpec(3).quantize(-0.3), 0.0);
  EXPECT_EQ(QuantSpec(3).quantize(1.7), 1.0);
  EXPECT_THROW(QuantSpec(1), DomainError);
  EXPECT_THROW(QuantSpec(257), DomainError);
  EXPECT_EQ(QuantSpec(5).grid(), (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
}

TEST(Dither, TwoPixelTieCase) {
  const Image out = fs_dither(Image(1, 2, 1, std::vector<double>{0.5, 0.5}), QuantSpec(2));
  EXPECT_EQ(out.at(0, 0), 1.0);
  EXPECT_EQ(out.at(0, 1), 0.0);
}

TEST(Dither, OracleReproducesFrozenFixtures) {
  for (const auto& f : fixtures::dither_4x4_k2()) {
    const Image in(4, 4, 1, std::vector<double>(f.input.begin(), f.input.end()));
    const Image ref = oracle::from_plane(oracle::floyd_steinberg(oracle::to_plane(in), 2));
    EXPECT_EQ(std::vector<double>(ref.data().begin(), ref.data().end()),
              std::vector<double>(f.expected.begin(), f.expected.end()))
        << f.name;
  }
}

TEST(Dither, LibraryMatchesFrozenFixtures) {
  for (const auto& f : fixtures::dither_4x4_k2()) {
    const Image in(4, 4, 1, std::vector<double>(f.input.begin(), f.input.end()));
    const Image out = fs_dither(in, QuantSpec(2));
    EXPECT_EQ(std::vector<double>(out.data().begin(), out.data().end()),
              std::vector<double>(f.expected.begin(), f.expected.end()))
        << f.name;
  }
}

TEST(Dither, MatchesOracleOnRandomPlanes) {
  for (int k : {2, 3, 5, 8}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Image in = oracle::random_image(7, 9, 1, seed + 100);
      const Image ref = oracle::from_plane(oracle::floyd_steinberg(oracle::to_plane(in), k));
      EXPECT_EQ(fs_dither(in, QuantSpec(k)), ref) << "k=" << k << " seed=" << seed;
    }
  }
}

TEST(Dither, ColourChannelsAreIndependent) {
  const Image rgb = oracle::random_image(6, 6, 3, 7);
  const Image out = fs_dither(rgb, QuantSpec(3));
  for (int c = 0; c < 3; ++c) {
    const auto ref = oracle::floyd_steinberg(oracle::to_plane(rgb, c), 3);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) EXPECT_EQ(out.at(y, x, c), ref[y][x]);
  }
}

TEST(Dither, OutputsLieOnTheGrid) {
  for (int k : {2, 3, 4, 7, 20, 256}) {
    const Image in = oracle::random_image(9, 11, 3, static_cast<std::uint64_t>(k));
    for (const Image& out : {fs_dither(in, QuantSpec(k)), fs_dither(in, QuantSpec(k), ScanOrder::serpentine),
                             quantize_uniform(in, QuantSpec(k))}) {
      for (double v : out.data()) ASSERT_TRUE(on_grid(v, k)) << v << " k=" << k;
    }
  }
}

TEST(Dither, GridImagesAreFixedPoints) {
  for (int k : {2, 3, 6}) {
    const Image in = quantize_uniform(oracle::random_image(8, 8, 3, 3), QuantSpec(k));
    EXPECT_EQ(fs_dither(in, QuantSpec(k)), in);
    EXPECT_EQ(quantize_uniform(in, QuantSpec(k)), in);
  }
}

TEST(Dither, UniformQuantizationIsWithinHalfAStep) {
  for (int k : {2, 3, 9}) {
    const Image in = oracle::random_image(10, 10, 1, 21);
    const Image out = quantize_uniform(in, QuantSpec(k));
    EXPECT_LE(linf_distance(in, out), QuantSpec(k).step() / 2 + 1e-15);
  }
}

TEST(Dither, DiffusionPreservesTheMean) {
  // The only error that is lost leaves through the right and bottom edges,
  // bounded by one quantization step per edge pixel.
  for (int k : {2, 3, 5}) {
    const Image in = oracle::random_image(16, 16, 1, 31 + k);
    const Image out = fs_dither(in, QuantSpec(k));
    const double bound = QuantSpec(k).step() * (16 + 16) / (16.0 * 16.0);
    EXPECT_LE(std::abs(mean(out) - mean(in)), bound) << k;
  }
}

TEST(Dither, GrayRampKeepsItsMean) {
  std::vector<double> d(32 * 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) d[y * 32 + x] = x / 31.0;
  const Image ramp(32, 32, 1, d);
  EXPECT_NEAR(mean(fs_dither(ramp, QuantSpec(2))), mean(ramp), 0.05);
}

TEST(Dither, FineGridStaysClose) {
  const Image in = oracle::random_image(12, 12, 3, 5);
  EXPECT_LE(linf_distance(fs_dither(in, QuantSpec(256)), in), 1.0 / 255.0);
}

TEST(Dither, SerpentineMirrorsOddRows) {
  // On a single row the scan direction cannot matter.
  const Image row = oracle::random_image(1, 13, 1, 8);
  EXPECT_EQ(fs_dither(row, QuantSpec(3), ScanOrder::serpentine), fs_dither(row, QuantSpec(3)));
  const Image img = oracle::random_image(6, 6, 1, 9);
  EXPECT_NE(fs_dither(img, QuantSpec(2), ScanOrder::serpentine), fs_dither(img, QuantSpec(2)));
}

TEST(Dither, GrayVariantDropsColour) {
  const Image rgb = oracle::random_image(5, 5, 3, 4);
  const Image g = fs_dither_gray(rgb, QuantSpec(2));
  EXPECT_EQ(g.channels(), 1);
  EXPECT_EQ(g, fs_dither(to_grayscale(rgb), QuantSpec(2)));
}

TEST(Dither, KernelValidation) {
  EXPECT_THROW(DiffusionKernel({{0, 1, 0.5}}), DomainError);
  EXPECT_THROW(DiffusionKernel({{0, -1, 1.0}}), DomainError);
  EXPECT_THROW(DiffusionKernel({{0, 1, -0.5}, {1, 0, 1.5}}), DomainError);
  const DiffusionKernel right_only({{0, 1, 1.0}});
  const Image out = fs_dither(Image(1, 2, 1, std::vector<double>{0.5, 0.5}), QuantSpec(2),
                              ScanOrder::raster, right_only);
  EXPECT_EQ(out.at(0, 1), 0.0);
}

}  // namespace
}  // namespace fsd
