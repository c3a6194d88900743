#include "rlm/harness/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace rlm::harness {

std::string config_fingerprint(const nlohmann::json& config, std::uint64_t seed) {
    const std::string canonical = config.dump() + "#" + std::to_string(seed);
    // FNV-1a 64
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest_atomic(const RunManifest& manifest, const std::string& path) {
    const nlohmann::json doc = {{"subcommand", manifest.subcommand},
                                {"config_hash", manifest.config_hash},
                                {"seed", manifest.seed},
                                {"tool_version", manifest.tool_version},
                                {"started_at", manifest.started_at},
                                {"finished_at", manifest.finished_at},
                                {"outputs", manifest.outputs}};
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write manifest: " + tmp);
        out << doc.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace rlm::harness
