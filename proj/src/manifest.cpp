#include "fedhunter/manifest.hpp"

#include "fedhunter/common.hpp"

namespace fedhunter::cli {

using nlohmann::json;

json RunManifest::to_json() const {
    return {{"command", command},          {"config", config},   {"seed", seed},
            {"inputs", inputs},            {"outputs", outputs}, {"tool_version", tool_version},
            {"duration_ms", duration_ms}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.seed = j.value("seed", static_cast<uint64_t>(0));
    m.inputs = j.value("inputs", std::vector<std::string>{});
    m.outputs = j.value("outputs", std::vector<std::string>{});
    m.tool_version = j.value("tool_version", std::string{});
    m.duration_ms = j.value("duration_ms", 0L);
    return m;
}

void write_manifests(const RunManifest& manifest) {
    const std::string body = manifest.to_json().dump(2) + "\n";
    for (const auto& out : manifest.outputs) {
        atomic_write_file(out + ".manifest.json", body);
    }
}

RunManifest load_manifest(const std::string& path) {
    try {
        return RunManifest::from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw DataError("manifest parse error in " + path + ": " + e.what());
    }
}

}  // namespace fedhunter::cli
