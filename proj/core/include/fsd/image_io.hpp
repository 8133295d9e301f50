// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fsd/image.hpp"

namespace fsd {

/// Loads an 8-bit PNG or a binary PGM (P5) / PPM (P6) with maxval 255.
/// Codes c map to c / 255. PNG alpha is dropped; palette and low bit-depth
/// gray are expanded; 16-bit PNG is rejected.
Image load_image(const std::filesystem::path& path);

/// Writes round(i * 255) codes. ".png" selects PNG; anything else writes P5
/// for gray images and P6 for RGB.
void save_image(const Image& img, const std::filesystem::path& path);

/// Netpbm codecs on in-memory buffers.
Image decode_netpbm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_netpbm(const Image& img);

/// round-half-up of i * 255
std::uint8_t to_code(double intensity) noexcept;

}  // namespace fsd
