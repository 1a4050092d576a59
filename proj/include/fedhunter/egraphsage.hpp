#ifndef FEDHUNTER_EGRAPHSAGE_HPP
#define FEDHUNTER_EGRAPHSAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fedhunter/checkpoint.hpp"
#include "fedhunter/metrics.hpp"
#include "fedhunter/provenance.hpp"
#include "fedhunter/rng.hpp"
#include "fedhunter/tensor.hpp"

namespace fedhunter::detect {

// Edge-featured GraphSAGE for provenance edges. Two message-passing
// layers (384 -> 128 -> 384, ReLU): a node's update consumes its own
// state concatenated with the mean over incident edges of
// concat(neighbor_state, edge_feature). Final node embeddings pass
// through Dropout(0.2) in training; an edge (u,v) is scored by a dense
// head on concat(h_u, h_v) followed by softmax over {benign, attack}.
class EGraphSageModel {
   public:
    static constexpr size_t kFeatureDim = 384;
    static constexpr size_t kHiddenDim = 128;
    static constexpr size_t kOutDim = 384;
    static constexpr size_t kPenultimateDim = 2 * kOutDim;  // 768
    static constexpr size_t kClasses = 2;
    static constexpr double kDropoutRate = 0.2;

    struct Cache {
        const prov::ProvenanceGraph* graph = nullptr;
        std::vector<double> node_feats;  // (N,384)
        std::vector<double> edge_feats;  // (E,384)
        std::vector<double> m1;          // (N,768) mean messages, layer 1
        std::vector<double> h1;          // (N,128) post-relu
        std::vector<double> m2;          // (N,512)
        std::vector<double> h2;          // (N,384) post-relu, pre-dropout
        std::vector<double> h2d;         // (N,384) post-dropout
        std::vector<uint8_t> drop_mask;  // empty unless training
        std::vector<double> logits;      // (E,2)
        std::vector<double> probs;       // (E,2)
    };

    explicit EGraphSageModel(uint64_t seed = 0);

    // Per-edge class probabilities (E,2). Feature overrides replace the
    // graph's stored embeddings (used by the explainer's interpolation).
    std::vector<double> forward(const prov::ProvenanceGraph& g, bool training, Rng* dropout_rng,
                                Cache* cache, const std::vector<double>* node_feats = nullptr,
                                const std::vector<double>* edge_feats = nullptr) const;

    struct InputGrads {
        std::vector<double> node_feats;
        std::vector<double> edge_feats;
    };
    // dlogits (E,2); accumulates parameter grads, returns input grads
    InputGrads backward(const Cache& cache, const std::vector<double>& dlogits);

    // inference-mode node embeddings (N,384) after both layers
    std::vector<double> embed_nodes(const prov::ProvenanceGraph& g) const;
    std::vector<double> penultimate_edge(const prov::ProvenanceGraph& g,
                                         const std::vector<double>& node_embeddings,
                                         size_t edge_idx) const;
    // softmax over the head applied to a 768-dim penultimate vector
    std::vector<double> head(const std::vector<double>& penult) const;

    void zero_grad();
    std::vector<nn::ParamRef> parameters();
    std::vector<nn::ParamRef> state_tensors();
    std::string fingerprint() const;

    nn::ModelCheckpoint to_checkpoint(nn::CheckpointMeta meta = {}) const;
    static EGraphSageModel from_checkpoint(const nn::ModelCheckpoint& ckpt);

   private:
    // sage layer weights stored dense: W1 (128 x 1152), W2 (384 x 640)
    std::vector<double> w1_, b1_, w2_, b2_, wh_, bh_;
    std::vector<double> dw1_, db1_, dw2_, db2_, dwh_, dbh_;
};

struct EgsTrainResult {
    std::vector<double> loss_history;
};

// Full-graph training with class-weighted softmax cross-entropy over the
// given labeled edges (weights: inverse class frequency, mean 1 over the
// training samples). Histories are recorded from a dropout-free forward.
EgsTrainResult train_egs(EGraphSageModel& model, const prov::ProvenanceGraph& g,
                         const std::vector<size_t>& train_edges, size_t epochs, double lr,
                         uint64_t seed);

DetectionReport evaluate_egs(const EGraphSageModel& model, const prov::ProvenanceGraph& g,
                             const std::vector<size_t>& edge_indices, double threshold = 0.5);

// convenience: everything labeled
std::vector<size_t> all_edge_indices(const prov::ProvenanceGraph& g);

}  // namespace fedhunter::detect

#endif
