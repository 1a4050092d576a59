#ifndef FEDHUNTER_CNN_GRU_HPP
#define FEDHUNTER_CNN_GRU_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "fedhunter/checkpoint.hpp"
#include "fedhunter/layers.hpp"
#include "fedhunter/metrics.hpp"
#include "fedhunter/netflow.hpp"

namespace fedhunter::detect {

// Hybrid flow classifier: three Conv1D(32,relu)+BatchNorm+MaxPool blocks
// over the (10,1) input in parallel with a GRU(3) over the same sequence,
// concatenated (320+3) into Dense(64) and a sigmoid head.
class CnnGruModel {
   public:
    static constexpr size_t kInputLen = 10;
    static constexpr size_t kChannels = 32;
    static constexpr size_t kGruHidden = 3;
    static constexpr size_t kPenultimateDim = 64;

    struct Cache {
        size_t B = 0;
        std::vector<double> x;
        std::vector<double> a1, a2, a3;  // post-relu conv outputs
        nn::BatchNorm1D::Cache bn1, bn2, bn3;
        std::vector<double> bn1_out, bn2_out, bn3_out;
        nn::MaxPool1D::Cache mp1, mp2, mp3;
        std::vector<double> p1, p2;  // pooled block outputs feeding the next conv
        nn::Gru::Cache gru;
        std::vector<double> concat;       // (B,323)
        std::vector<double> penultimate;  // (B,64)
        std::vector<double> prob;         // (B)
    };

    explicit CnnGruModel(uint64_t seed = 0);

    // x flattened (B,10); returns probabilities (B)
    std::vector<double> forward(const std::vector<double>& x, size_t B, bool training,
                                Cache* cache = nullptr) const;
    // moves BatchNorm running statistics toward the cached batch stats
    void commit_batch_stats(const Cache& cache);
    // dlogit: gradient wrt the pre-sigmoid logit, (B); accumulates
    // parameter grads and returns dx (B,10)
    std::vector<double> backward_from_logit(const Cache& cache, const std::vector<double>& dlogit);

    double predict_one(const std::array<double, kInputLen>& x) const;
    std::vector<double> predict(const std::vector<netflow::FeatureVector>& data) const;

    std::vector<double> penultimate(const std::array<double, kInputLen>& x) const;
    double head(const std::vector<double>& penult) const;

    // d(prob)/dx for a single instance, via one backward pass
    std::array<double, kInputLen> input_gradient(const std::array<double, kInputLen>& x) const;

    void zero_grad();
    std::vector<nn::ParamRef> parameters();     // trainable
    std::vector<nn::ParamRef> state_tensors();  // trainable + running stats
    std::string fingerprint() const;

    nn::ModelCheckpoint to_checkpoint(nn::CheckpointMeta meta = {}) const;
    static CnnGruModel from_checkpoint(const nn::ModelCheckpoint& ckpt);

   private:
    nn::Conv1D conv1_, conv2_, conv3_;
    nn::BatchNorm1D bn1_, bn2_, bn3_;
    nn::Gru gru_;
    nn::Dense fc_, head_;
};

struct TrainResult {
    std::vector<double> loss_history;  // one entry per epoch
};

// Local supervised training: binary cross-entropy over seeded mini-batches
// (batch composition fixed across epochs for reproducible histories).
TrainResult train_cnn_gru(CnnGruModel& model, const std::vector<netflow::FeatureVector>& data,
                          size_t epochs, size_t batch_size, double lr, uint64_t seed);

DetectionReport evaluate_cnn_gru(const CnnGruModel& model,
                                 const std::vector<netflow::FeatureVector>& data,
                                 double threshold = 0.5);

}  // namespace fedhunter::detect

#endif
