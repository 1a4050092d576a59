#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "fedhunter/common.hpp"
#include "fedhunter/federated.hpp"
#include "fedhunter/netflow.hpp"
#include "fedhunter/synth.hpp"

using namespace fedhunter;
using namespace fedhunter::fed;

namespace {

std::vector<netflow::FeatureVector> separable_flows(size_t n, uint64_t seed) {
    synth::NetflowSynthConfig cfg;
    cfg.n = n;
    cfg.seed = seed;
    std::vector<netflow::FeatureVector> out;
    for (const auto& r : synth::synth_netflow(cfg)) {
        out.push_back(netflow::normalize_record(r));
    }
    return out;
}

ClientUpdate scalar_update(int id, double w, size_t n_k) {
    return {id, {{"w", {1}, {w}}}, n_k};
}

}  // namespace

TEST_CASE("partition_equal: sizes, determinism and errors") {
    const auto ten = partition_equal(10, 10, 1);
    REQUIRE(ten.size() == 10);
    for (const auto& p : ten) {
        CHECK(p.size() == 1);
    }

    const auto eleven = partition_equal(11, 10, 1);
    size_t twos = 0, total = 0;
    for (const auto& p : eleven) {
        CHECK(p.size() >= 1);
        CHECK(p.size() <= 2);
        twos += p.size() == 2;
        total += p.size();
    }
    CHECK(twos == 1);
    CHECK(total == 11);

    CHECK(partition_equal(100, 7, 42) == partition_equal(100, 7, 42));
    CHECK(partition_equal(100, 7, 42) != partition_equal(100, 7, 43));
    CHECK_THROWS_AS(partition_equal(5, 6, 1), UsageError);
}

TEST_CASE("aggregate: hand-computed weighted mean") {
    // n-weights 1:3 over scalars 0 and 4 -> 0*(1/4) + 4*(3/4) = 3
    const auto out = aggregate({scalar_update(0, 0.0, 1), scalar_update(1, 4.0, 3)});
    REQUIRE(out.size() == 1);
    CHECK(std::fabs(out[0].data[0] - 3.0) < 1e-12);
}

TEST_CASE("aggregate: K=1 is the identity, bitwise") {
    const double w = 0.12345678901234567;
    const auto out = aggregate({scalar_update(0, w, 17)});
    CHECK(out[0].data[0] == w);
}

TEST_CASE("aggregate: identical clients reproduce the common weights") {
    std::vector<ClientUpdate> updates;
    for (int k = 0; k < 5; ++k) {
        updates.push_back(scalar_update(k, 0.777, 10 + k));
    }
    const auto out = aggregate(updates);
    CHECK(std::fabs(out[0].data[0] - 0.777) <= 1e-15);
}

TEST_CASE("aggregate is invariant to client arrival order (bitwise)") {
    const auto a =
        aggregate({scalar_update(0, 0.1, 2), scalar_update(1, 0.9, 5), scalar_update(2, -3.0, 1)});
    const auto b =
        aggregate({scalar_update(2, -3.0, 1), scalar_update(0, 0.1, 2), scalar_update(1, 0.9, 5)});
    CHECK(a[0].data[0] == b[0].data[0]);
}

TEST_CASE("aggregate: scaling every n_k by a common factor changes nothing") {
    const auto a = aggregate({scalar_update(0, 1.5, 2), scalar_update(1, -0.5, 6)});
    const auto b = aggregate({scalar_update(0, 1.5, 200), scalar_update(1, -0.5, 600)});
    CHECK(std::fabs(a[0].data[0] - b[0].data[0]) < 1e-12);
}

TEST_CASE("aggregate rejects mismatched shapes naming client and layer") {
    ClientUpdate bad = {1, {{"w", {2}, {1.0, 2.0}}}, 3};
    try {
        aggregate({scalar_update(0, 0.0, 1), bad});
        FAIL("expected shape mismatch");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("client 1") != std::string::npos);
        CHECK(msg.find("w") != std::string::npos);
    }
    CHECK_THROWS_AS(aggregate({}), DataError);
}

TEST_CASE("K=1 federation equals sequential local training, bitwise") {
    const auto data = separable_flows(120, 7);
    auto [train, test] = netflow::stratified_split(data, 0.7, 3);

    FederatedConfig cfg;
    cfg.num_clients = 1;
    cfg.rounds = 3;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.lr = 0.001;
    cfg.seed = 3;
    const auto fed_result = run_federated_cnn_gru(cfg, train, test);

    // the manual comparator: same init, same partition shuffle, same
    // per-round seeds, aggregation skipped entirely
    detect::CnnGruModel local(cfg.seed);
    const auto part = partition_equal(train.size(), 1, cfg.seed);
    std::vector<netflow::FeatureVector> local_data;
    for (size_t i : part[0]) {
        local_data.push_back(train[i]);
    }
    for (size_t round = 0; round < cfg.rounds; ++round) {
        detect::train_cnn_gru(local, local_data, cfg.epochs, cfg.batch_size, cfg.lr,
                              cfg.seed ^ 0 ^ round);
    }
    const auto fed_fp = nn::weights_fingerprint(fed_result.checkpoint.layers);
    CHECK(fed_fp == local.fingerprint());
}

TEST_CASE("K=2 federation on separable flows converges") {
    const auto data = separable_flows(600, 21);
    auto [train, test] = netflow::stratified_split(data, 0.7, 22);
    FederatedConfig cfg;
    cfg.num_clients = 2;
    cfg.rounds = 5;
    // small batches give the BatchNorm running estimates enough commits
    // to calibrate within a short desk-scale run
    cfg.epochs = 4;
    cfg.batch_size = 8;
    cfg.lr = 0.001;
    cfg.seed = 23;
    const auto result = run_federated_cnn_gru(cfg, train, test);
    REQUIRE(result.rounds.size() == 5);
    CHECK(result.rounds.back().report.accuracy >= 0.99);
    CHECK(result.rounds.back().client_losses.size() == 2);
    // metadata carries the full round history
    CHECK(result.checkpoint.metadata.metrics_history.size() == 5);
    CHECK(result.checkpoint.model_kind == "cnn_gru");
}

TEST_CASE("federated runs are deterministic end to end") {
    const auto data = separable_flows(200, 31);
    auto [train, test] = netflow::stratified_split(data, 0.7, 32);
    FederatedConfig cfg;
    cfg.num_clients = 3;
    cfg.rounds = 2;
    cfg.epochs = 2;
    cfg.batch_size = 32;
    cfg.seed = 33;
    const auto a = run_federated_cnn_gru(cfg, train, test);
    const auto b = run_federated_cnn_gru(cfg, train, test);
    CHECK(nn::weights_fingerprint(a.checkpoint.layers) ==
          nn::weights_fingerprint(b.checkpoint.layers));
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (size_t r = 0; r < a.rounds.size(); ++r) {
        CHECK(a.rounds[r].client_losses == b.rounds[r].client_losses);
        CHECK(a.rounds[r].report.accuracy == b.rounds[r].report.accuracy);
    }
}

TEST_CASE("federated e_graphsage round trip on a small graph") {
    synth::ProvenanceSynthConfig pcfg;
    pcfg.nodes = 80;
    pcfg.edges = 400;
    pcfg.attack_rate = 0.05;
    pcfg.seed = 41;
    const auto g = prov::build_graph_from_lines(synth::synth_provenance_jsonl(pcfg));
    std::vector<int> labels(g.edge_count());
    for (size_t i = 0; i < labels.size(); ++i) {
        labels[i] = g.edges()[i].label;
    }
    auto [train_idx, test_idx] = stratified_split_indices(labels, 0.7, 42);

    FederatedConfig cfg;
    cfg.num_clients = 2;
    cfg.rounds = 2;
    cfg.epochs = 6;
    cfg.lr = 0.001;
    cfg.seed = 43;
    const auto result = run_federated_egs(cfg, g, train_idx, test_idx);
    CHECK(result.rounds.size() == 2);
    CHECK(result.checkpoint.model_kind == "e_graphsage");
    // accuracy should at least beat the majority baseline on this easy set
    CHECK(result.rounds.back().report.accuracy > 0.9);
}

TEST_CASE("stratified_split_indices keeps per-class counts within one sample") {
    std::vector<int> labels;
    for (int i = 0; i < 97; ++i) {
        labels.push_back(i % 5 == 0 ? 1 : 0);
    }
    auto [train, test] = stratified_split_indices(labels, 0.7, 9);
    size_t train_pos = 0, test_pos = 0;
    for (size_t i : train) train_pos += labels[i];
    for (size_t i : test) test_pos += labels[i];
    const size_t pos_total = train_pos + test_pos;
    CHECK(train.size() + test.size() == labels.size());
    CHECK(std::fabs(static_cast<double>(train_pos) - 0.7 * pos_total) <= 1.0);
}
