#pragma once

// JSON (de)serialization of Scenario files. The document mirrors the
// Scenario type field-for-field with units carried in the field names;
// slot indices are 0-based.

#include "gridsched/model.hpp"

#include <string>

namespace gridsched {

std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text);

void save_scenario(const Scenario& s, const std::string& path);
Scenario load_scenario(const std::string& path);

// Applies a dotted-path override (e.g. "tariff.incentive_w=0.35") to the
// JSON form of a scenario. Throws SchemaError on unknown paths.
std::string apply_override(const std::string& json_text, const std::string& key,
                           const std::string& value);

} // namespace gridsched
