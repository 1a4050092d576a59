#include "fedhunter/cnn_gru.hpp"

#include <algorithm>
#include <cmath>

#include "fedhunter/common.hpp"
#include "fedhunter/optimizer.hpp"
#include "fedhunter/parallel.hpp"
#include "fedhunter/rng.hpp"

namespace fedhunter::detect {

namespace {
constexpr size_t kT = CnnGruModel::kInputLen;
constexpr size_t kC = CnnGruModel::kChannels;
constexpr size_t kFlat = kT * kC;  // 320
constexpr size_t kConcat = kFlat + CnnGruModel::kGruHidden;  // 323
}  // namespace

CnnGruModel::CnnGruModel(uint64_t seed) {
    Rng rng(seed);
    conv1_.init(1, kC, rng);
    bn1_.init(kC);
    conv2_.init(kC, kC, rng);
    bn2_.init(kC);
    conv3_.init(kC, kC, rng);
    bn3_.init(kC);
    gru_.init(1, kGruHidden, rng);
    fc_.init(kConcat, kPenultimateDim, rng);
    head_.init(kPenultimateDim, 1, rng);
}

std::vector<double> CnnGruModel::forward(const std::vector<double>& x, size_t B, bool training,
                                         Cache* cache) const {
    if (x.size() != B * kT) {
        throw DataError("cnn_gru: input must be (B,10), got " + std::to_string(x.size()) +
                        " values for B=" + std::to_string(B));
    }
    Cache local;
    Cache& c = cache ? *cache : local;
    c.B = B;
    c.x = x;

    // block 1 (input has 1 channel)
    c.a1 = conv1_.forward(x, B, kT);
    nn::relu_inplace(c.a1);
    c.bn1_out = bn1_.forward(c.a1, B, kT, training, &c.bn1);
    c.p1 = nn::MaxPool1D::forward(c.bn1_out, B, kT, kC, &c.mp1);
    // block 2
    c.a2 = conv2_.forward(c.p1, B, kT);
    nn::relu_inplace(c.a2);
    c.bn2_out = bn2_.forward(c.a2, B, kT, training, &c.bn2);
    c.p2 = nn::MaxPool1D::forward(c.bn2_out, B, kT, kC, &c.mp2);
    // block 3
    c.a3 = conv3_.forward(c.p2, B, kT);
    nn::relu_inplace(c.a3);
    c.bn3_out = bn3_.forward(c.a3, B, kT, training, &c.bn3);
    const std::vector<double> p3 = nn::MaxPool1D::forward(c.bn3_out, B, kT, kC, &c.mp3);

    // GRU branch reads the raw sequence
    const std::vector<double> gru_out = gru_.forward(x, B, kT, &c.gru);

    // concat: flattened conv stack (320) + gru state (3)
    c.concat.assign(B * kConcat, 0.0);
    for (size_t b = 0; b < B; ++b) {
        std::copy(p3.begin() + b * kFlat, p3.begin() + (b + 1) * kFlat,
                  c.concat.begin() + b * kConcat);
        std::copy(gru_out.begin() + b * kGruHidden, gru_out.begin() + (b + 1) * kGruHidden,
                  c.concat.begin() + b * kConcat + kFlat);
    }
    c.penultimate = fc_.forward(c.concat, B);
    const std::vector<double> logit = head_.forward(c.penultimate, B);
    c.prob.resize(B);
    for (size_t b = 0; b < B; ++b) {
        c.prob[b] = nn::sigmoid(logit[b]);
    }
    return c.prob;
}

void CnnGruModel::commit_batch_stats(const Cache& cache) {
    bn1_.commit_running(cache.bn1);
    bn2_.commit_running(cache.bn2);
    bn3_.commit_running(cache.bn3);
}

std::vector<double> CnnGruModel::backward_from_logit(const Cache& c,
                                                     const std::vector<double>& dlogit) {
    const size_t B = c.B;
    std::vector<double> dpen = head_.backward(c.penultimate, dlogit, B);
    std::vector<double> dconcat = fc_.backward(c.concat, dpen, B);

    std::vector<double> dp3(B * kFlat);
    std::vector<double> dgru(B * kGruHidden);
    for (size_t b = 0; b < B; ++b) {
        std::copy(dconcat.begin() + b * kConcat, dconcat.begin() + b * kConcat + kFlat,
                  dp3.begin() + b * kFlat);
        std::copy(dconcat.begin() + b * kConcat + kFlat, dconcat.begin() + (b + 1) * kConcat,
                  dgru.begin() + b * kGruHidden);
    }

    // conv stack, block 3 -> 1
    std::vector<double> d = nn::MaxPool1D::backward(c.mp3, dp3);
    d = bn3_.backward(c.bn3, d);
    d = nn::relu_backward(c.a3, d);
    d = conv3_.backward(c.p2, d, B, kT);
    d = nn::MaxPool1D::backward(c.mp2, d);
    d = bn2_.backward(c.bn2, d);
    d = nn::relu_backward(c.a2, d);
    d = conv2_.backward(c.p1, d, B, kT);
    d = nn::MaxPool1D::backward(c.mp1, d);
    d = bn1_.backward(c.bn1, d);
    d = nn::relu_backward(c.a1, d);
    std::vector<double> dx = conv1_.backward(c.x, d, B, kT);

    const std::vector<double> dx_gru = gru_.backward(c.gru, dgru);
    for (size_t i = 0; i < dx.size(); ++i) {
        dx[i] += dx_gru[i];
    }
    return dx;
}

double CnnGruModel::predict_one(const std::array<double, kInputLen>& x) const {
    const std::vector<double> xs(x.begin(), x.end());
    return forward(xs, 1, false)[0];
}

std::vector<double> CnnGruModel::predict(const std::vector<netflow::FeatureVector>& data) const {
    std::vector<double> probs(data.size());
    // chunked inference; slot-indexed writes keep results order-stable
    const size_t chunk = 256;
    const size_t n_chunks = (data.size() + chunk - 1) / chunk;
    parallel_for(n_chunks, [&](size_t ci) {
        const size_t lo = ci * chunk;
        const size_t hi = std::min(lo + chunk, data.size());
        std::vector<double> xs((hi - lo) * kInputLen);
        for (size_t i = lo; i < hi; ++i) {
            std::copy(data[i].values.begin(), data[i].values.end(),
                      xs.begin() + (i - lo) * kInputLen);
        }
        const std::vector<double> p = forward(xs, hi - lo, false);
        std::copy(p.begin(), p.end(), probs.begin() + lo);
    });
    return probs;
}

std::vector<double> CnnGruModel::penultimate(const std::array<double, kInputLen>& x) const {
    Cache cache;
    const std::vector<double> xs(x.begin(), x.end());
    forward(xs, 1, false, &cache);
    return cache.penultimate;
}

double CnnGruModel::head(const std::vector<double>& penult) const {
    if (penult.size() != kPenultimateDim) {
        throw DataError("cnn_gru head expects a 64-dim penultimate vector");
    }
    return nn::sigmoid(head_.forward(penult, 1)[0]);
}

std::array<double, CnnGruModel::kInputLen> CnnGruModel::input_gradient(
    const std::array<double, kInputLen>& x) const {
    // backward mutates grad buffers; run on a scratch copy of the model
    CnnGruModel scratch = *this;
    Cache cache;
    const std::vector<double> xs(x.begin(), x.end());
    const double p = scratch.forward(xs, 1, false, &cache)[0];
    scratch.zero_grad();
    const std::vector<double> dx = scratch.backward_from_logit(cache, {p * (1.0 - p)});
    std::array<double, kInputLen> out{};
    std::copy(dx.begin(), dx.end(), out.begin());
    return out;
}

void CnnGruModel::zero_grad() {
    conv1_.zero_grad();
    conv2_.zero_grad();
    conv3_.zero_grad();
    bn1_.zero_grad();
    bn2_.zero_grad();
    bn3_.zero_grad();
    gru_.zero_grad();
    fc_.zero_grad();
    head_.zero_grad();
}

std::vector<nn::ParamRef> CnnGruModel::state_tensors() {
    std::vector<nn::ParamRef> refs;
    conv1_.collect("conv1", refs);
    bn1_.collect("bn1", refs);
    conv2_.collect("conv2", refs);
    bn2_.collect("bn2", refs);
    conv3_.collect("conv3", refs);
    bn3_.collect("bn3", refs);
    gru_.collect("gru", refs);
    fc_.collect("fc", refs);
    head_.collect("head", refs);
    return refs;
}

std::vector<nn::ParamRef> CnnGruModel::parameters() {
    std::vector<nn::ParamRef> refs = state_tensors();
    std::erase_if(refs, [](const nn::ParamRef& r) { return r.grad == nullptr; });
    return refs;
}

std::string CnnGruModel::fingerprint() const {
    auto& self = const_cast<CnnGruModel&>(*this);
    return nn::weights_fingerprint(self.state_tensors());
}

nn::ModelCheckpoint CnnGruModel::to_checkpoint(nn::CheckpointMeta meta) const {
    auto& self = const_cast<CnnGruModel&>(*this);
    return nn::snapshot("cnn_gru", self.state_tensors(), std::move(meta));
}

CnnGruModel CnnGruModel::from_checkpoint(const nn::ModelCheckpoint& ckpt) {
    if (ckpt.model_kind != "cnn_gru") {
        throw DataError("checkpoint holds model_kind '" + ckpt.model_kind + "', expected cnn_gru");
    }
    CnnGruModel model(0);
    nn::restore(ckpt, model.state_tensors());
    return model;
}

TrainResult train_cnn_gru(CnnGruModel& model, const std::vector<netflow::FeatureVector>& data,
                          size_t epochs, size_t batch_size, double lr, uint64_t seed) {
    if (data.empty()) {
        throw DataError("train_cnn_gru: empty dataset");
    }
    if (batch_size == 0) {
        batch_size = data.size();
    }
    Rng rng(seed);
    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    rng.shuffle(order);

    nn::AdamState adam;
    TrainResult result;
    const auto params = model.parameters();
    const size_t n = data.size();
    for (size_t epoch = 0; epoch < epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (size_t start = 0; start < n; start += batch_size) {
            const size_t bs = std::min(batch_size, n - start);
            std::vector<double> xs(bs * CnnGruModel::kInputLen);
            std::vector<double> ys(bs);
            for (size_t i = 0; i < bs; ++i) {
                const auto& fv = data[order[start + i]];
                std::copy(fv.values.begin(), fv.values.end(),
                          xs.begin() + i * CnnGruModel::kInputLen);
                ys[i] = static_cast<double>(fv.label);
            }
            CnnGruModel::Cache cache;
            const std::vector<double> probs = model.forward(xs, bs, true, &cache);
            model.commit_batch_stats(cache);
            std::vector<double> dlogit(bs);
            for (size_t i = 0; i < bs; ++i) {
                const double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
                epoch_loss += -(ys[i] * std::log(p) + (1.0 - ys[i]) * std::log(1.0 - p));
                dlogit[i] = (probs[i] - ys[i]) / static_cast<double>(bs);
            }
            model.zero_grad();
            model.backward_from_logit(cache, dlogit);
            nn::adam_step(params, adam, lr);
        }
        epoch_loss /= static_cast<double>(n);
        if (std::isnan(epoch_loss)) {
            throw NumericError("cnn_gru training diverged (NaN loss) at epoch " +
                               std::to_string(epoch));
        }
        result.loss_history.push_back(epoch_loss);
    }
    return result;
}

DetectionReport evaluate_cnn_gru(const CnnGruModel& model,
                                 const std::vector<netflow::FeatureVector>& data,
                                 double threshold) {
    const std::vector<double> probs = model.predict(data);
    std::vector<int> labels(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        labels[i] = data[i].label;
    }
    return evaluate_predictions(probs, labels, threshold);
}

}  // namespace fedhunter::detect
