// SPDX-License-Identifier: MIT
//
// Declarative JSON model files. Functions are chosen from parametric
// families; see README.md for the schema.
#pragma once

#include "twoscale/model.hpp"

#include <json.hpp>

#include <string>

namespace twoscale {

struct LoadedModel {
    std::string name;
    RawModel raw;
    ProbeConfig probes;
    std::uint64_t path_seed = 1;
    nlohmann::json source;  ///< the parsed document

    ModelSpec build() const { return build_model(raw, probes); }
};

/// Throws ValidationError("config", ...) on schema errors.
LoadedModel parse_model(const nlohmann::json& doc);
LoadedModel load_model_file(const std::string& path);

/// Canonical serialization used for hashing (sorted keys, no whitespace).
std::string canonical_dump(const nlohmann::json& doc);

}  // namespace twoscale
