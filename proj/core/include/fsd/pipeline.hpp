// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fsd/dither.hpp"
#include "fsd/filters.hpp"
#include "fsd/image.hpp"

namespace fsd {

namespace stage {
struct HFlip {};
struct VFlip {};
struct Rotate {
  int quarter_turns = 1;
};
struct Grayscale {};
struct Quantize {
  int levels = 3;
};
struct FsDither {
  int levels = 3;
  ScanOrder scan = ScanOrder::raster;
};
struct Blur {
  BlurSpec spec;
};
}  // namespace stage

using Stage = std::variant<stage::HFlip, stage::VFlip, stage::Rotate, stage::Grayscale,
                           stage::Quantize, stage::FsDither, stage::Blur>;

/// Short name used in descriptors and error messages ("fs_dither", "blur", ...).
std::string stage_name(const Stage& s);

/// Ordered list of transform descriptors. Empty means identity.
///
/// Descriptors serialize as a JSON array of {"op": name, "params": {...}}:
///   hflip, vflip, grayscale            no params
///   rotate      {"quarter_turns": 1}
///   quantize    {"k": 3}
///   fs_dither   {"k": 3, "scan": "raster" | "serpentine"}
///   blur        {"sigma": 3.0, "size": 9}
struct TransformPipeline {
  std::vector<Stage> stages;

  bool empty() const noexcept { return stages.empty(); }

  /// Index of the first stage whose output channel count differs from its
  /// input, starting from `input_channels`; nullopt if channels are preserved.
  std::optional<std::size_t> first_channel_change(int input_channels) const;

  /// Channel count after all stages.
  int output_channels(int input_channels) const;

  friend bool operator==(const TransformPipeline&, const TransformPipeline&);
};

/// Applies stages left to right. A failing stage is rethrown as DomainError
/// carrying its index and name.
Image apply_pipeline(const Image& img, const TransformPipeline& pipeline);

TransformPipeline parse_pipeline(std::string_view json_text);
std::string pipeline_to_json(const TransformPipeline& pipeline);

std::string_view to_string(ScanOrder scan) noexcept;
ScanOrder parse_scan_order(std::string_view name);

}  // namespace fsd
