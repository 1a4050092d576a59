#include "fedhunter/federated.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>

#include "fedhunter/common.hpp"
#include "fedhunter/parallel.hpp"
#include "fedhunter/rng.hpp"

namespace fedhunter::fed {

using nlohmann::json;

json RoundLog::to_json() const {
    return {{"round", round}, {"client_losses", client_losses}, {"report", report.to_json()}};
}

std::vector<std::vector<size_t>> partition_equal(size_t n, size_t num_clients, uint64_t seed) {
    if (num_clients == 0) {
        throw UsageError("partition_equal: need at least one client");
    }
    if (num_clients > n) {
        throw UsageError("partition_equal: " + std::to_string(num_clients) +
                         " clients but only " + std::to_string(n) + " samples");
    }
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) {
        idx[i] = i;
    }
    Rng rng(seed);
    rng.shuffle(idx);
    std::vector<std::vector<size_t>> parts(num_clients);
    const size_t base = n / num_clients;
    const size_t extra = n % num_clients;
    size_t pos = 0;
    for (size_t k = 0; k < num_clients; ++k) {
        const size_t size = base + (k < extra ? 1 : 0);
        parts[k].assign(idx.begin() + pos, idx.begin() + pos + size);
        pos += size;
    }
    return parts;
}

std::pair<std::vector<size_t>, std::vector<size_t>> stratified_split_indices(
    const std::vector<int>& labels, double train_fraction, uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw UsageError("train_fraction must be in (0,1)");
    }
    std::array<std::vector<size_t>, 2> per_class;
    for (size_t i = 0; i < labels.size(); ++i) {
        per_class[labels[i] == 1 ? 1 : 0].push_back(i);
    }
    Rng rng(seed);
    std::pair<std::vector<size_t>, std::vector<size_t>> out;
    for (int cls = 0; cls < 2; ++cls) {
        auto& idx = per_class[cls];
        if (idx.empty()) {
            std::cerr << "warning: class " << cls << " has no samples, absent from both splits\n";
            continue;
        }
        rng.shuffle(idx);
        const size_t n_train =
            static_cast<size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
        for (size_t j = 0; j < idx.size(); ++j) {
            (j < n_train ? out.first : out.second).push_back(idx[j]);
        }
    }
    return out;
}

std::vector<nn::NamedTensor> aggregate(std::vector<ClientUpdate> updates) {
    if (updates.empty()) {
        throw DataError("aggregate: no client updates");
    }
    std::sort(updates.begin(), updates.end(), [](const ClientUpdate& a, const ClientUpdate& b) {
        return a.client_id < b.client_id;
    });
    size_t n = 0;
    for (const auto& u : updates) {
        if (u.n_k == 0) {
            throw DataError("aggregate: client " + std::to_string(u.client_id) +
                            " reports an empty dataset");
        }
        n += u.n_k;
    }
    const auto& ref = updates.front().local_weights;
    std::vector<nn::NamedTensor> out;
    out.reserve(ref.size());
    for (const auto& t : ref) {
        out.push_back({t.name, t.shape, std::vector<double>(t.data.size(), 0.0)});
    }
    for (const auto& u : updates) {
        if (u.local_weights.size() != ref.size()) {
            throw DataError("aggregate: client " + std::to_string(u.client_id) +
                            " has a different tensor count");
        }
        const double coeff = static_cast<double>(u.n_k) / static_cast<double>(n);
        for (size_t i = 0; i < ref.size(); ++i) {
            const auto& t = u.local_weights[i];
            if (t.name != out[i].name || t.shape != out[i].shape) {
                throw DataError("aggregate: shape mismatch at client " +
                                std::to_string(u.client_id) + " layer " + t.name + " " +
                                nn::shape_str(t.shape) + " vs " + nn::shape_str(out[i].shape));
            }
            auto& acc = out[i].data;
            for (size_t j = 0; j < acc.size(); ++j) {
                acc[j] += coeff * t.data[j];
            }
        }
    }
    return out;
}

namespace {

uint64_t client_seed(uint64_t seed, size_t client_id, size_t round) {
    return seed ^ static_cast<uint64_t>(client_id) ^ static_cast<uint64_t>(round);
}

std::vector<nn::NamedTensor> snapshot_tensors(const std::vector<nn::ParamRef>& refs) {
    std::vector<nn::NamedTensor> out;
    out.reserve(refs.size());
    for (const auto& r : refs) {
        out.push_back({r.name, r.shape, *r.value});
    }
    return out;
}

void load_tensors(const std::vector<nn::NamedTensor>& src, const std::vector<nn::ParamRef>& dst) {
    for (size_t i = 0; i < dst.size(); ++i) {
        *dst[i].value = src[i].data;
    }
}

nn::CheckpointMeta make_meta(const FederatedConfig& cfg, const std::vector<RoundLog>& rounds) {
    nn::CheckpointMeta meta;
    meta.round = static_cast<long>(cfg.rounds);
    meta.seed = cfg.seed;
    for (const auto& log : rounds) {
        meta.metrics_history.push_back(log.to_json());
    }
    return meta;
}

}  // namespace

FederatedResult run_federated_cnn_gru(const FederatedConfig& cfg,
                                      const std::vector<netflow::FeatureVector>& train,
                                      const std::vector<netflow::FeatureVector>& test) {
    if (cfg.rounds == 0) {
        throw UsageError("federated config needs rounds >= 1");
    }
    const auto parts = partition_equal(train.size(), cfg.num_clients, cfg.seed);
    std::vector<std::vector<netflow::FeatureVector>> client_data(cfg.num_clients);
    for (size_t k = 0; k < cfg.num_clients; ++k) {
        client_data[k].reserve(parts[k].size());
        for (size_t i : parts[k]) {
            client_data[k].push_back(train[i]);
        }
    }

    detect::CnnGruModel global(cfg.seed);
    std::vector<nn::NamedTensor> global_weights = snapshot_tensors(global.state_tensors());

    FederatedResult result;
    for (size_t round = 0; round < cfg.rounds; ++round) {
        std::vector<ClientUpdate> updates(cfg.num_clients);
        std::vector<double> losses(cfg.num_clients, 0.0);
        std::vector<std::string> failures(cfg.num_clients);
        parallel_for(cfg.num_clients, [&](size_t k) {
            try {
                detect::CnnGruModel local(0);
                load_tensors(global_weights, local.state_tensors());
                const auto tr =
                    detect::train_cnn_gru(local, client_data[k], cfg.epochs, cfg.batch_size,
                                          cfg.lr, client_seed(cfg.seed, k, round));
                losses[k] = tr.loss_history.back();
                updates[k] = {static_cast<int>(k), snapshot_tensors(local.state_tensors()),
                              client_data[k].size()};
            } catch (const std::exception& e) {
                failures[k] = e.what();
            }
        });
        for (size_t k = 0; k < cfg.num_clients; ++k) {
            if (!failures[k].empty()) {
                throw NumericError("round " + std::to_string(round) + " client " +
                                   std::to_string(k) + " failed: " + failures[k]);
            }
        }
        global_weights = aggregate(std::move(updates));
        load_tensors(global_weights, global.state_tensors());

        RoundLog log;
        log.round = round;
        log.client_losses = losses;
        log.report = detect::evaluate_cnn_gru(global, test, cfg.threshold);
        result.rounds.push_back(std::move(log));
    }
    result.checkpoint = global.to_checkpoint(make_meta(cfg, result.rounds));
    return result;
}

FederatedResult run_federated_egs(const FederatedConfig& cfg, const prov::ProvenanceGraph& g,
                                  const std::vector<size_t>& train_edges,
                                  const std::vector<size_t>& test_edges) {
    if (cfg.rounds == 0) {
        throw UsageError("federated config needs rounds >= 1");
    }
    const auto parts = partition_equal(train_edges.size(), cfg.num_clients, cfg.seed);
    std::vector<std::vector<size_t>> client_edges(cfg.num_clients);
    for (size_t k = 0; k < cfg.num_clients; ++k) {
        client_edges[k].reserve(parts[k].size());
        for (size_t i : parts[k]) {
            client_edges[k].push_back(train_edges[i]);
        }
    }

    detect::EGraphSageModel global(cfg.seed);
    std::vector<nn::NamedTensor> global_weights = snapshot_tensors(global.state_tensors());

    FederatedResult result;
    for (size_t round = 0; round < cfg.rounds; ++round) {
        std::vector<ClientUpdate> updates(cfg.num_clients);
        std::vector<double> losses(cfg.num_clients, 0.0);
        std::vector<std::string> failures(cfg.num_clients);
        parallel_for(cfg.num_clients, [&](size_t k) {
            try {
                detect::EGraphSageModel local(0);
                load_tensors(global_weights, local.state_tensors());
                const auto tr = detect::train_egs(local, g, client_edges[k], cfg.epochs, cfg.lr,
                                                  client_seed(cfg.seed, k, round));
                losses[k] = tr.loss_history.back();
                updates[k] = {static_cast<int>(k), snapshot_tensors(local.state_tensors()),
                              client_edges[k].size()};
            } catch (const std::exception& e) {
                failures[k] = e.what();
            }
        });
        for (size_t k = 0; k < cfg.num_clients; ++k) {
            if (!failures[k].empty()) {
                throw NumericError("round " + std::to_string(round) + " client " +
                                   std::to_string(k) + " failed: " + failures[k]);
            }
        }
        global_weights = aggregate(std::move(updates));
        load_tensors(global_weights, global.state_tensors());

        RoundLog log;
        log.round = round;
        log.client_losses = losses;
        log.report = detect::evaluate_egs(global, g, test_edges, cfg.threshold);
        result.rounds.push_back(std::move(log));
    }
    result.checkpoint = global.to_checkpoint(make_meta(cfg, result.rounds));
    return result;
}

}  // namespace fedhunter::fed
