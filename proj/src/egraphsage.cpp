#include "fedhunter/egraphsage.hpp"

#include <algorithm>
#include <cmath>

#include "fedhunter/common.hpp"
#include "fedhunter/layers.hpp"
#include "fedhunter/optimizer.hpp"

namespace fedhunter::detect {

namespace {

constexpr size_t kF = EGraphSageModel::kFeatureDim;   // 384
constexpr size_t kH = EGraphSageModel::kHiddenDim;    // 128
constexpr size_t kO = EGraphSageModel::kOutDim;       // 384
constexpr size_t kMsg1 = kF + kF;                     // 768
constexpr size_t kIn1 = kF + kMsg1;                   // 1152
constexpr size_t kMsg2 = kH + kF;                     // 512
constexpr size_t kIn2 = kH + kMsg2;                   // 640
constexpr size_t kPen = EGraphSageModel::kPenultimateDim;
constexpr size_t kCls = EGraphSageModel::kClasses;

// mean message per node: concat(prev(neighbor), edge_feat), averaged over
// incident edges in the graph's canonical (edge-id sorted) order
void aggregate(const prov::ProvenanceGraph& g, const std::vector<double>& prev, size_t prev_dim,
               const std::vector<double>& edge_feats, std::vector<double>& msg, size_t msg_dim) {
    const size_t n = g.node_count();
    msg.assign(n * msg_dim, 0.0);
    for (size_t v = 0; v < n; ++v) {
        const auto& inc = g.incident(v);
        if (inc.empty()) {
            continue;  // isolated node keeps a zero aggregate
        }
        double* m = msg.data() + v * msg_dim;
        for (const auto& ie : inc) {
            const double* hn = prev.data() + ie.neighbor * prev_dim;
            const double* ef = edge_feats.data() + ie.edge_index * kF;
            for (size_t i = 0; i < prev_dim; ++i) {
                m[i] += hn[i];
            }
            for (size_t i = 0; i < kF; ++i) {
                m[prev_dim + i] += ef[i];
            }
        }
        const double inv = 1.0 / static_cast<double>(inc.size());
        for (size_t i = 0; i < msg_dim; ++i) {
            m[i] *= inv;
        }
    }
}

// h = relu(W concat(prev_v, msg_v) + b) for every node
void sage_forward(const std::vector<double>& w, const std::vector<double>& b,
                  const std::vector<double>& prev, size_t prev_dim,
                  const std::vector<double>& msg, size_t msg_dim, size_t out_dim, size_t n,
                  std::vector<double>& h) {
    h.assign(n * out_dim, 0.0);
    for (size_t v = 0; v < n; ++v) {
        const double* pv = prev.data() + v * prev_dim;
        const double* mv = msg.data() + v * msg_dim;
        double* hv = h.data() + v * out_dim;
        const size_t in_dim = prev_dim + msg_dim;
        for (size_t o = 0; o < out_dim; ++o) {
            const double* wr = w.data() + o * in_dim;
            double acc = b[o];
            for (size_t i = 0; i < prev_dim; ++i) {
                acc += wr[i] * pv[i];
            }
            for (size_t i = 0; i < msg_dim; ++i) {
                acc += wr[prev_dim + i] * mv[i];
            }
            hv[o] = acc > 0.0 ? acc : 0.0;
        }
    }
}

}  // namespace

EGraphSageModel::EGraphSageModel(uint64_t seed) {
    Rng rng(seed);
    w1_.assign(kH * kIn1, 0.0);
    b1_.assign(kH, 0.0);
    w2_.assign(kO * kIn2, 0.0);
    b2_.assign(kO, 0.0);
    wh_.assign(kCls * kPen, 0.0);
    bh_.assign(kCls, 0.0);
    nn::glorot_init(w1_, kIn1, kH, rng);
    nn::glorot_init(w2_, kIn2, kO, rng);
    nn::glorot_init(wh_, kPen, kCls, rng);
    zero_grad();
}

std::vector<double> EGraphSageModel::forward(const prov::ProvenanceGraph& g, bool training,
                                             Rng* dropout_rng, Cache* cache,
                                             const std::vector<double>* node_feats,
                                             const std::vector<double>* edge_feats) const {
    const size_t n = g.node_count();
    const size_t e = g.edge_count();
    Cache local;
    Cache& c = cache ? *cache : local;
    c.graph = &g;

    if (node_feats) {
        if (node_feats->size() != n * kF) {
            throw DataError("e_graphsage: node feature override has wrong size");
        }
        c.node_feats = *node_feats;
    } else {
        c.node_feats.resize(n * kF);
        for (size_t v = 0; v < n; ++v) {
            const auto& emb = g.nodes()[v].embedding;
            std::copy(emb.begin(), emb.end(), c.node_feats.begin() + v * kF);
        }
    }
    if (edge_feats) {
        if (edge_feats->size() != e * kF) {
            throw DataError("e_graphsage: edge feature override has wrong size");
        }
        c.edge_feats = *edge_feats;
    } else {
        c.edge_feats.resize(e * kF);
        for (size_t i = 0; i < e; ++i) {
            const auto& emb = g.edges()[i].embedding;
            std::copy(emb.begin(), emb.end(), c.edge_feats.begin() + i * kF);
        }
    }

    aggregate(g, c.node_feats, kF, c.edge_feats, c.m1, kMsg1);
    sage_forward(w1_, b1_, c.node_feats, kF, c.m1, kMsg1, kH, n, c.h1);
    aggregate(g, c.h1, kH, c.edge_feats, c.m2, kMsg2);
    sage_forward(w2_, b2_, c.h1, kH, c.m2, kMsg2, kO, n, c.h2);

    if (training) {
        if (!dropout_rng) {
            throw DataError("e_graphsage: training forward requires a dropout rng");
        }
        c.drop_mask.resize(n * kO);
        c.h2d.resize(n * kO);
        const double keep = 1.0 - kDropoutRate;
        for (size_t i = 0; i < n * kO; ++i) {
            c.drop_mask[i] = dropout_rng->uniform() < keep ? 1 : 0;
            c.h2d[i] = c.drop_mask[i] ? c.h2[i] / keep : 0.0;
        }
    } else {
        c.drop_mask.clear();
        c.h2d = c.h2;
    }

    c.logits.assign(e * kCls, 0.0);
    for (size_t i = 0; i < e; ++i) {
        const double* hu = c.h2d.data() + g.src_index(i) * kO;
        const double* hv = c.h2d.data() + g.dst_index(i) * kO;
        double* l = c.logits.data() + i * kCls;
        for (size_t o = 0; o < kCls; ++o) {
            const double* wr = wh_.data() + o * kPen;
            double acc = bh_[o];
            for (size_t j = 0; j < kO; ++j) {
                acc += wr[j] * hu[j] + wr[kO + j] * hv[j];
            }
            l[o] = acc;
        }
    }
    c.probs = nn::softmax_rows(c.logits, e, kCls);
    return c.probs;
}

EGraphSageModel::InputGrads EGraphSageModel::backward(const Cache& c,
                                                      const std::vector<double>& dlogits) {
    const prov::ProvenanceGraph& g = *c.graph;
    const size_t n = g.node_count();
    const size_t e = g.edge_count();

    InputGrads grads;
    grads.node_feats.assign(n * kF, 0.0);
    grads.edge_feats.assign(e * kF, 0.0);

    // edge head
    std::vector<double> dh2d(n * kO, 0.0);
    for (size_t i = 0; i < e; ++i) {
        const size_t u = g.src_index(i);
        const size_t v = g.dst_index(i);
        const double* hu = c.h2d.data() + u * kO;
        const double* hv = c.h2d.data() + v * kO;
        const double* dl = dlogits.data() + i * kCls;
        double* du = dh2d.data() + u * kO;
        double* dv = dh2d.data() + v * kO;
        for (size_t o = 0; o < kCls; ++o) {
            const double go = dl[o];
            if (go == 0.0) {
                continue;
            }
            dbh_[o] += go;
            double* dwr = dwh_.data() + o * kPen;
            const double* wr = wh_.data() + o * kPen;
            for (size_t j = 0; j < kO; ++j) {
                dwr[j] += go * hu[j];
                dwr[kO + j] += go * hv[j];
                du[j] += go * wr[j];
                dv[j] += go * wr[kO + j];
            }
        }
    }

    // dropout
    std::vector<double> dh2(n * kO);
    if (!c.drop_mask.empty()) {
        const double keep = 1.0 - kDropoutRate;
        for (size_t i = 0; i < n * kO; ++i) {
            dh2[i] = c.drop_mask[i] ? dh2d[i] / keep : 0.0;
        }
    } else {
        dh2 = dh2d;
    }

    // layer 2
    std::vector<double> dh1(n * kH, 0.0);
    {
        std::vector<double> dm(kMsg2);
        for (size_t v = 0; v < n; ++v) {
            const double* h2v = c.h2.data() + v * kO;
            const double* dv = dh2.data() + v * kO;
            const double* h1v = c.h1.data() + v * kH;
            const double* mv = c.m2.data() + v * kMsg2;
            double* dh1v = dh1.data() + v * kH;
            std::fill(dm.begin(), dm.end(), 0.0);
            for (size_t o = 0; o < kO; ++o) {
                if (h2v[o] <= 0.0) {
                    continue;  // relu gate
                }
                const double gz = dv[o];
                if (gz == 0.0) {
                    continue;
                }
                db2_[o] += gz;
                double* dwr = dw2_.data() + o * kIn2;
                const double* wr = w2_.data() + o * kIn2;
                for (size_t i = 0; i < kH; ++i) {
                    dwr[i] += gz * h1v[i];
                    dh1v[i] += gz * wr[i];
                }
                for (size_t i = 0; i < kMsg2; ++i) {
                    dwr[kH + i] += gz * mv[i];
                    dm[i] += gz * wr[kH + i];
                }
            }
            const auto& inc = g.incident(v);
            if (inc.empty()) {
                continue;
            }
            const double inv = 1.0 / static_cast<double>(inc.size());
            for (const auto& ie : inc) {
                double* dhn = dh1.data() + ie.neighbor * kH;
                double* def = grads.edge_feats.data() + ie.edge_index * kF;
                for (size_t i = 0; i < kH; ++i) {
                    dhn[i] += dm[i] * inv;
                }
                for (size_t i = 0; i < kF; ++i) {
                    def[i] += dm[kH + i] * inv;
                }
            }
        }
    }

    // layer 1
    {
        std::vector<double> dm(kMsg1);
        for (size_t v = 0; v < n; ++v) {
            const double* h1v = c.h1.data() + v * kH;
            const double* dv = dh1.data() + v * kH;
            const double* h0v = c.node_feats.data() + v * kF;
            const double* mv = c.m1.data() + v * kMsg1;
            double* dx = grads.node_feats.data() + v * kF;
            std::fill(dm.begin(), dm.end(), 0.0);
            for (size_t o = 0; o < kH; ++o) {
                if (h1v[o] <= 0.0) {
                    continue;
                }
                const double gz = dv[o];
                if (gz == 0.0) {
                    continue;
                }
                db1_[o] += gz;
                double* dwr = dw1_.data() + o * kIn1;
                const double* wr = w1_.data() + o * kIn1;
                for (size_t i = 0; i < kF; ++i) {
                    dwr[i] += gz * h0v[i];
                    dx[i] += gz * wr[i];
                }
                for (size_t i = 0; i < kMsg1; ++i) {
                    dwr[kF + i] += gz * mv[i];
                    dm[i] += gz * wr[kF + i];
                }
            }
            const auto& inc = g.incident(v);
            if (inc.empty()) {
                continue;
            }
            const double inv = 1.0 / static_cast<double>(inc.size());
            for (const auto& ie : inc) {
                double* dxn = grads.node_feats.data() + ie.neighbor * kF;
                double* def = grads.edge_feats.data() + ie.edge_index * kF;
                for (size_t i = 0; i < kF; ++i) {
                    dxn[i] += dm[i] * inv;
                    def[i] += dm[kF + i] * inv;
                }
            }
        }
    }
    return grads;
}

std::vector<double> EGraphSageModel::embed_nodes(const prov::ProvenanceGraph& g) const {
    Cache cache;
    forward(g, false, nullptr, &cache);
    return cache.h2;
}

std::vector<double> EGraphSageModel::penultimate_edge(const prov::ProvenanceGraph& g,
                                                      const std::vector<double>& node_embeddings,
                                                      size_t edge_idx) const {
    std::vector<double> pen(kPen);
    const double* hu = node_embeddings.data() + g.src_index(edge_idx) * kO;
    const double* hv = node_embeddings.data() + g.dst_index(edge_idx) * kO;
    std::copy(hu, hu + kO, pen.begin());
    std::copy(hv, hv + kO, pen.begin() + kO);
    return pen;
}

std::vector<double> EGraphSageModel::head(const std::vector<double>& penult) const {
    if (penult.size() != kPen) {
        throw DataError("e_graphsage head expects a 768-dim penultimate vector");
    }
    std::vector<double> logits(kCls, 0.0);
    for (size_t o = 0; o < kCls; ++o) {
        const double* wr = wh_.data() + o * kPen;
        double acc = bh_[o];
        for (size_t j = 0; j < kPen; ++j) {
            acc += wr[j] * penult[j];
        }
        logits[o] = acc;
    }
    return nn::softmax_rows(logits, 1, kCls);
}

void EGraphSageModel::zero_grad() {
    dw1_.assign(w1_.size(), 0.0);
    db1_.assign(b1_.size(), 0.0);
    dw2_.assign(w2_.size(), 0.0);
    db2_.assign(b2_.size(), 0.0);
    dwh_.assign(wh_.size(), 0.0);
    dbh_.assign(bh_.size(), 0.0);
}

std::vector<nn::ParamRef> EGraphSageModel::state_tensors() {
    return {
        {"sage1.W", {kH, kIn1}, &w1_, &dw1_}, {"sage1.b", {kH}, &b1_, &db1_},
        {"sage2.W", {kO, kIn2}, &w2_, &dw2_}, {"sage2.b", {kO}, &b2_, &db2_},
        {"head.W", {kCls, kPen}, &wh_, &dwh_}, {"head.b", {kCls}, &bh_, &dbh_},
    };
}

std::vector<nn::ParamRef> EGraphSageModel::parameters() { return state_tensors(); }

std::string EGraphSageModel::fingerprint() const {
    auto& self = const_cast<EGraphSageModel&>(*this);
    return nn::weights_fingerprint(self.state_tensors());
}

nn::ModelCheckpoint EGraphSageModel::to_checkpoint(nn::CheckpointMeta meta) const {
    auto& self = const_cast<EGraphSageModel&>(*this);
    return nn::snapshot("e_graphsage", self.state_tensors(), std::move(meta));
}

EGraphSageModel EGraphSageModel::from_checkpoint(const nn::ModelCheckpoint& ckpt) {
    if (ckpt.model_kind != "e_graphsage") {
        throw DataError("checkpoint holds model_kind '" + ckpt.model_kind +
                        "', expected e_graphsage");
    }
    EGraphSageModel model(0);
    nn::restore(ckpt, model.state_tensors());
    return model;
}

std::vector<size_t> all_edge_indices(const prov::ProvenanceGraph& g) {
    std::vector<size_t> idx(g.edge_count());
    for (size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    return idx;
}

namespace {

// inverse class frequency, scaled so the mean weight over samples is 1
std::array<double, 2> class_weights(const prov::ProvenanceGraph& g,
                                    const std::vector<size_t>& edges) {
    std::array<size_t, 2> counts{0, 0};
    for (size_t e : edges) {
        ++counts[g.edges()[e].label == 1 ? 1 : 0];
    }
    const size_t present = (counts[0] > 0 ? 1 : 0) + (counts[1] > 0 ? 1 : 0);
    std::array<double, 2> w{0.0, 0.0};
    for (int cls = 0; cls < 2; ++cls) {
        if (counts[cls] > 0) {
            w[cls] = static_cast<double>(edges.size()) /
                     (static_cast<double>(present) * static_cast<double>(counts[cls]));
        }
    }
    return w;
}

double weighted_ce(const prov::ProvenanceGraph& g, const std::vector<double>& probs,
                   const std::vector<size_t>& edges, const std::array<double, 2>& w) {
    double loss = 0.0;
    for (size_t e : edges) {
        const int y = g.edges()[e].label == 1 ? 1 : 0;
        const double p = std::clamp(probs[e * 2 + y], 1e-12, 1.0);
        loss += -w[y] * std::log(p);
    }
    return loss / static_cast<double>(edges.size());
}

}  // namespace

EgsTrainResult train_egs(EGraphSageModel& model, const prov::ProvenanceGraph& g,
                         const std::vector<size_t>& train_edges, size_t epochs, double lr,
                         uint64_t seed) {
    if (train_edges.empty()) {
        throw DataError("train_egs: no training edges");
    }
    const auto w = class_weights(g, train_edges);
    const double inv_n = 1.0 / static_cast<double>(train_edges.size());
    Rng dropout_rng(seed);
    nn::AdamState adam;
    const auto params = model.parameters();
    EgsTrainResult result;
    for (size_t epoch = 0; epoch < epochs; ++epoch) {
        EGraphSageModel::Cache cache;
        const std::vector<double> probs = model.forward(g, true, &dropout_rng, &cache);
        std::vector<double> dlogits(g.edge_count() * 2, 0.0);
        for (size_t e : train_edges) {
            const int y = g.edges()[e].label == 1 ? 1 : 0;
            for (int cls = 0; cls < 2; ++cls) {
                dlogits[e * 2 + cls] =
                    w[y] * inv_n * (probs[e * 2 + cls] - (cls == y ? 1.0 : 0.0));
            }
        }
        model.zero_grad();
        model.backward(cache, dlogits);
        nn::adam_step(params, adam, lr);

        // history comes from a dropout-free pass so it tracks the model,
        // not the epoch's mask
        const std::vector<double> eval_probs = model.forward(g, false, nullptr, nullptr);
        const double loss = weighted_ce(g, eval_probs, train_edges, w);
        if (std::isnan(loss)) {
            throw NumericError("e_graphsage training diverged (NaN loss) at epoch " +
                               std::to_string(epoch));
        }
        result.loss_history.push_back(loss);
    }
    return result;
}

DetectionReport evaluate_egs(const EGraphSageModel& model, const prov::ProvenanceGraph& g,
                             const std::vector<size_t>& edge_indices, double threshold) {
    if (edge_indices.empty()) {
        throw DataError("evaluate_egs: no edges to evaluate");
    }
    const std::vector<double> probs = model.forward(g, false, nullptr, nullptr);
    std::vector<double> attack_probs(edge_indices.size());
    std::vector<int> labels(edge_indices.size());
    for (size_t i = 0; i < edge_indices.size(); ++i) {
        attack_probs[i] = probs[edge_indices[i] * 2 + 1];
        labels[i] = g.edges()[edge_indices[i]].label;
    }
    return evaluate_predictions(attack_probs, labels, threshold);
}

}  // namespace fedhunter::detect
