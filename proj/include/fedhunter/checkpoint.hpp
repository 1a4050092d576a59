#ifndef FEDHUNTER_CHECKPOINT_HPP
#define FEDHUNTER_CHECKPOINT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fedhunter/tensor.hpp"
#include "nlohmann/json.hpp"

namespace fedhunter::nn {

struct NamedTensor {
    std::string name;
    std::vector<size_t> shape;
    std::vector<double> data;
};

struct CheckpointMeta {
    long round = 0;
    uint64_t seed = 0;
    nlohmann::json metrics_history = nlohmann::json::array();
};

// Portable JSON checkpoint; floats round-trip exactly.
struct ModelCheckpoint {
    int format_version = 1;
    std::string model_kind;  // "cnn_gru" | "e_graphsage"
    std::vector<NamedTensor> layers;
    CheckpointMeta metadata;
};

ModelCheckpoint snapshot(const std::string& model_kind, const std::vector<ParamRef>& tensors,
                         CheckpointMeta meta = {});

// Copies checkpoint tensors back into the model; names and shapes must
// match the model's declared layout exactly.
void restore(const ModelCheckpoint& ckpt, const std::vector<ParamRef>& tensors);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path);
ModelCheckpoint load_checkpoint(const std::string& path);

// FNV-1a over names, shapes and raw parameter bytes; identifies the exact
// weights that produced any derived artifact.
std::string weights_fingerprint(const std::vector<NamedTensor>& layers);
std::string weights_fingerprint(const std::vector<ParamRef>& tensors);

}  // namespace fedhunter::nn

#endif
