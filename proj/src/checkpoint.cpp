#include "fedhunter/checkpoint.hpp"

#include <cstring>

#include "fedhunter/common.hpp"

namespace fedhunter::nn {

using nlohmann::json;

ModelCheckpoint snapshot(const std::string& model_kind, const std::vector<ParamRef>& tensors,
                         CheckpointMeta meta) {
    ModelCheckpoint ckpt;
    ckpt.model_kind = model_kind;
    ckpt.metadata = std::move(meta);
    for (const auto& t : tensors) {
        ckpt.layers.push_back({t.name, t.shape, *t.value});
    }
    return ckpt;
}

void restore(const ModelCheckpoint& ckpt, const std::vector<ParamRef>& tensors) {
    if (ckpt.layers.size() != tensors.size()) {
        throw DataError("checkpoint has " + std::to_string(ckpt.layers.size()) +
                        " tensors, model expects " + std::to_string(tensors.size()));
    }
    for (size_t i = 0; i < tensors.size(); ++i) {
        const auto& src = ckpt.layers[i];
        const auto& dst = tensors[i];
        if (src.name != dst.name) {
            throw DataError("checkpoint tensor '" + src.name + "' does not match model tensor '" +
                            dst.name + "'");
        }
        if (src.shape != dst.shape) {
            throw DataError("shape mismatch for " + src.name + ": checkpoint " +
                            shape_str(src.shape) + " vs model " + shape_str(dst.shape));
        }
        *dst.value = src.data;
    }
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path) {
    json layers = json::array();
    for (const auto& t : ckpt.layers) {
        layers.push_back({{"name", t.name}, {"shape", t.shape}, {"data", t.data}});
    }
    const json root = {
        {"format_version", ckpt.format_version},
        {"model_kind", ckpt.model_kind},
        {"layers", layers},
        {"metadata",
         {{"round", ckpt.metadata.round},
          {"seed", ckpt.metadata.seed},
          {"metrics_history", ckpt.metadata.metrics_history}}},
    };
    atomic_write_file(path, root.dump() + "\n");
}

ModelCheckpoint load_checkpoint(const std::string& path) {
    json root;
    try {
        root = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw DataError("checkpoint parse error in " + path + ": " + e.what());
    }
    ModelCheckpoint ckpt;
    ckpt.format_version = root.value("format_version", 0);
    if (ckpt.format_version != 1) {
        throw DataError("unsupported checkpoint format_version in " + path);
    }
    ckpt.model_kind = root.at("model_kind").get<std::string>();
    if (ckpt.model_kind != "cnn_gru" && ckpt.model_kind != "e_graphsage") {
        throw DataError("unknown model_kind '" + ckpt.model_kind + "' in " + path);
    }
    for (const auto& j : root.at("layers")) {
        NamedTensor t;
        t.name = j.at("name").get<std::string>();
        t.shape = j.at("shape").get<std::vector<size_t>>();
        t.data = j.at("data").get<std::vector<double>>();
        if (Tensor::numel(t.shape) != t.data.size()) {
            throw DataError("tensor " + t.name + " shape/data mismatch in " + path);
        }
        ckpt.layers.push_back(std::move(t));
    }
    if (root.contains("metadata")) {
        const auto& m = root.at("metadata");
        ckpt.metadata.round = m.value("round", 0L);
        ckpt.metadata.seed = m.value("seed", static_cast<uint64_t>(0));
        if (m.contains("metrics_history")) {
            ckpt.metadata.metrics_history = m.at("metrics_history");
        }
    }
    return ckpt;
}

std::string weights_fingerprint(const std::vector<NamedTensor>& layers) {
    uint64_t h = kFnvOffset;
    for (const auto& t : layers) {
        h = fnv1a64(t.name.data(), t.name.size(), h);
        for (size_t s : t.shape) {
            const uint64_t v = s;
            h = fnv1a64(&v, sizeof(v), h);
        }
        h = fnv1a64(t.data.data(), t.data.size() * sizeof(double), h);
    }
    return to_hex(h);
}

std::string weights_fingerprint(const std::vector<ParamRef>& tensors) {
    std::vector<NamedTensor> layers;
    layers.reserve(tensors.size());
    for (const auto& t : tensors) {
        layers.push_back({t.name, t.shape, *t.value});
    }
    return weights_fingerprint(layers);
}

}  // namespace fedhunter::nn
