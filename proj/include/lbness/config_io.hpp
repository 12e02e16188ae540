#pragma once

#include <string>

#include <json.hpp>

#include "lbness/model.hpp"

namespace lbness {

// ---------------------------------------------------------------------------
// Configuration schema (version 1). Top-level keys: schema, charge, leads,
// dot, couplings. Lead vectors are maps from 1-based site index (string key)
// to [re, im]; the dot matrix is a row-major list of [re, im] pairs; beta is
// a positive number or the string "inf". Structural problems throw
// ConfigError; semantic problems are left to validate().
// ---------------------------------------------------------------------------

SystemSpec system_from_json(const nlohmann::json& j);
nlohmann::ordered_json system_to_json(const SystemSpec& spec);

/// Read and parse a config file. Throws ConfigError on I/O or schema faults.
SystemSpec load_system(const std::string& path);

}  // namespace lbness
