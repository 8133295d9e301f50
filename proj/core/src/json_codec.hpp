// SPDX-License-Identifier: Apache-2.0
// Internal JSON conversions shared by pipeline, grid and report code.
#pragma once

#include <json.hpp>

#include "fsd/attacks.hpp"
#include "fsd/pipeline.hpp"

namespace fsd::detail {

using json = nlohmann::ordered_json;

json stage_to_json(const Stage& s);
Stage stage_from_json(const json& j);
json pipeline_to_json_value(const TransformPipeline& p);
TransformPipeline pipeline_from_json_value(const json& j);

json attack_to_json(const AttackConfig& cfg);
AttackConfig attack_from_json(const json& j);
json ste_to_json(const SteConfig& cfg);
SteConfig ste_from_json(const json& j);

/// Fetches an optional field with a default; wrong types raise DomainError
/// naming the key.
template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DomainError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace fsd::detail
