#pragma once

#include "json.hpp"
#include "vauq/evaluation.hpp"
#include "vauq/scores.hpp"
#include "vauq/toy_model.hpp"
#include "vauq/types.hpp"

// nlohmann::json conversions for configuration and record types. Parsing is
// strict: unknown keys and wrong types raise ConfigError.
namespace vauq {

void to_json(nlohmann::json& j, const LayerBand& b);
void from_json(const nlohmann::json& j, LayerBand& b);

void to_json(nlohmann::json& j, const Box& b);
void from_json(const nlohmann::json& j, Box& b);

void to_json(nlohmann::json& j, const ToyArchitecture& a);
void from_json(const nlohmann::json& j, ToyArchitecture& a);

void to_json(nlohmann::json& j, const ToyScene& s);
void from_json(const nlohmann::json& j, ToyScene& s);

void to_json(nlohmann::json& j, const VauqParams& p);
void from_json(const nlohmann::json& j, VauqParams& p);

void to_json(nlohmann::json& j, const SweepGrid& g);
void from_json(const nlohmann::json& j, SweepGrid& g);

/// Throws ConfigError if `j` is not an object or has keys outside `allowed`.
void require_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* what);

}  // namespace vauq
