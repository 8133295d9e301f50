// SPDX-License-Identifier: Apache-2.0
#include "fsd/pipeline.hpp"

#include <string>

#include "fsd/error.hpp"
#include "json_codec.hpp"

namespace fsd {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Image apply_stage(const Image& img, const Stage& s) {
  return std::visit(
      overloaded{
          [&](const stage::HFlip&) { return hflip(img); },
          [&](const stage::VFlip&) { return vflip(img); },
          [&](const stage::Rotate& r) { return rotate(img, r.quarter_turns); },
          [&](const stage::Grayscale&) { return to_grayscale(img); },
          [&](const stage::Quantize& q) { return quantize_uniform(img, QuantSpec(q.levels)); },
          [&](const stage::FsDither& f) { return fs_dither(img, QuantSpec(f.levels), f.scan); },
          [&](const stage::Blur& b) { return gaussian_blur(img, b.spec); },
      },
      s);
}

bool same_stage(const Stage& a, const Stage& b) {
  if (a.index() != b.index()) return false;
  return std::visit(
      overloaded{
          [&](const stage::Rotate& r) { return r.quarter_turns == std::get<stage::Rotate>(b).quarter_turns; },
          [&](const stage::Quantize& q) { return q.levels == std::get<stage::Quantize>(b).levels; },
          [&](const stage::FsDither& f) {
            const auto& g = std::get<stage::FsDither>(b);
            return f.levels == g.levels && f.scan == g.scan;
          },
          [&](const stage::Blur& x) {
            const auto& y = std::get<stage::Blur>(b);
            return x.spec.sigma == y.spec.sigma && x.spec.kernel_size == y.spec.kernel_size;
          },
          [](const auto&) { return true; },
      },
      a);
}

}  // namespace

std::string stage_name(const Stage& s) {
  return std::visit(overloaded{
                        [](const stage::HFlip&) { return std::string("hflip"); },
                        [](const stage::VFlip&) { return std::string("vflip"); },
                        [](const stage::Rotate&) { return std::string("rotate"); },
                        [](const stage::Grayscale&) { return std::string("grayscale"); },
                        [](const stage::Quantize&) { return std::string("quantize"); },
                        [](const stage::FsDither&) { return std::string("fs_dither"); },
                        [](const stage::Blur&) { return std::string("blur"); },
                    },
                    s);
}

std::optional<std::size_t> TransformPipeline::first_channel_change(int input_channels) const {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (std::holds_alternative<stage::Grayscale>(stages[i]) && input_channels != 1) return i;
  }
  return std::nullopt;
}

int TransformPipeline::output_channels(int input_channels) const {
  for (const auto& s : stages) {
    if (std::holds_alternative<stage::Grayscale>(s)) input_channels = 1;
  }
  return input_channels;
}

bool operator==(const TransformPipeline& a, const TransformPipeline& b) {
  if (a.stages.size() != b.stages.size()) return false;
  for (std::size_t i = 0; i < a.stages.size(); ++i) {
    if (!same_stage(a.stages[i], b.stages[i])) return false;
  }
  return true;
}

Image apply_pipeline(const Image& img, const TransformPipeline& pipeline) {
  Image cur = img;
  for (std::size_t i = 0; i < pipeline.stages.size(); ++i) {
    try {
      cur = apply_stage(cur, pipeline.stages[i]);
    } catch (const Error& e) {
      throw DomainError("pipeline stage " + std::to_string(i) + " (" +
                        stage_name(pipeline.stages[i]) + "): " + e.what());
    }
  }
  return cur;
}

std::string_view to_string(ScanOrder scan) noexcept {
  return scan == ScanOrder::raster ? "raster" : "serpentine";
}

ScanOrder parse_scan_order(std::string_view name) {
  if (name == "raster") return ScanOrder::raster;
  if (name == "serpentine") return ScanOrder::serpentine;
  throw DomainError("unknown scan order '" + std::string(name) + "'");
}

namespace detail {

json stage_to_json(const Stage& s) {
  json j;
  j["op"] = stage_name(s);
  json params = json::object();
  std::visit(overloaded{
                 [&](const stage::Rotate& r) { params["quarter_turns"] = r.quarter_turns; },
                 [&](const stage::Quantize& q) { params["k"] = q.levels; },
                 [&](const stage::FsDither& f) {
                   params["k"] = f.levels;
                   params["scan"] = std::string(to_string(f.scan));
                 },
                 [&](const stage::Blur& b) {
                   params["sigma"] = b.spec.sigma;
                   params["size"] = b.spec.kernel_size;
                 },
                 [](const auto&) {},
             },
             s);
  j["params"] = std::move(params);
  return j;
}

Stage stage_from_json(const json& j) {
  if (!j.is_object() || !j.contains("op") || !j["op"].is_string()) {
    throw DomainError("pipeline stage must be an object with a string 'op'");
  }
  const auto op = j["op"].get<std::string>();
  const json params = j.contains("params") ? j["params"] : json::object();
  if (op == "hflip") return stage::HFlip{};
  if (op == "vflip") return stage::VFlip{};
  if (op == "grayscale") return stage::Grayscale{};
  if (op == "rotate") {
    const int turns = get_or<int>(params, "quarter_turns", 1);
    if (turns < 1 || turns > 3) throw DomainError("rotate: quarter_turns must be 1, 2 or 3");
    return stage::Rotate{turns};
  }
  if (op == "quantize") {
    const int k = get_or<int>(params, "k", 3);
    static_cast<void>(QuantSpec{k});
    return stage::Quantize{k};
  }
  if (op == "fs_dither") {
    const int k = get_or<int>(params, "k", 3);
    static_cast<void>(QuantSpec{k});
    return stage::FsDither{k, parse_scan_order(get_or<std::string>(params, "scan", "raster"))};
  }
  if (op == "blur") {
    BlurSpec spec{get_or<double>(params, "sigma", 3.0), get_or<int>(params, "size", 9)};
    spec.validate();
    return stage::Blur{spec};
  }
  throw DomainError("unknown pipeline op '" + op + "'");
}

json pipeline_to_json_value(const TransformPipeline& p) {
  json arr = json::array();
  for (const auto& s : p.stages) arr.push_back(stage_to_json(s));
  return arr;
}

TransformPipeline pipeline_from_json_value(const json& j) {
  if (!j.is_array()) throw DomainError("pipeline descriptor must be a JSON array");
  TransformPipeline p;
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      p.stages.push_back(stage_from_json(j[i]));
    } catch (const DomainError& e) {
      throw DomainError("pipeline stage " + std::to_string(i) + ": " + e.what());
    }
  }
  return p;
}

}  // namespace detail

TransformPipeline parse_pipeline(std::string_view json_text) {
  detail::json j;
  try {
    j = detail::json::parse(json_text);
  } catch (const detail::json::parse_error& e) {
    throw DomainError(std::string("pipeline JSON: ") + e.what());
  }
  return detail::pipeline_from_json_value(j);
}

std::string pipeline_to_json(const TransformPipeline& pipeline) {
  return detail::pipeline_to_json_value(pipeline).dump();
}

}  // namespace fsd
