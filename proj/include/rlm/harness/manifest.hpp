#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace rlm::harness {

inline constexpr const char* kToolVersion = "rlmlab 0.1.0";

// Stable fingerprint of a config document plus seed; identical inputs give
// identical hashes across runs.
std::string config_fingerprint(const nlohmann::json& config, std::uint64_t seed);

std::string utc_timestamp();

struct RunManifest {
    std::string subcommand;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> outputs;
};

// Writes to a temp file in the same directory, then renames into place.
void write_manifest_atomic(const RunManifest& manifest, const std::string& path);

}  // namespace rlm::harness
