#ifndef FEDHUNTER_MANIFEST_HPP
#define FEDHUNTER_MANIFEST_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

namespace fedhunter::cli {

// Written atomically next to every output artifact (<artifact>.manifest.json).
// The resolved config is sufficient to rerun the command and reproduce the
// artifact bytes.
struct RunManifest {
    std::string command;
    nlohmann::json config = nlohmann::json::object();
    uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string tool_version;
    long duration_ms = 0;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

void write_manifests(const RunManifest& manifest);
RunManifest load_manifest(const std::string& path);

}  // namespace fedhunter::cli

#endif
