#ifndef FEDHUNTER_FEDERATED_HPP
#define FEDHUNTER_FEDERATED_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fedhunter/checkpoint.hpp"
#include "fedhunter/cnn_gru.hpp"
#include "fedhunter/egraphsage.hpp"
#include "fedhunter/metrics.hpp"

namespace fedhunter::fed {

// The client -> server message: trained weights plus the local sample
// count that sets this client's share of the average.
struct ClientUpdate {
    int client_id = 0;
    std::vector<nn::NamedTensor> local_weights;
    size_t n_k = 0;
};

struct FederatedConfig {
    size_t num_clients = 10;
    size_t rounds = 20;
    size_t epochs = 25;
    size_t batch_size = 512;  // 0 = full batch
    double lr = 0.001;
    uint64_t seed = 0;
    std::string partition = "equal";
    double threshold = 0.5;
};

struct RoundLog {
    size_t round = 0;
    std::vector<double> client_losses;  // final local epoch loss, by client id
    detect::DetectionReport report;     // global model on the held-out test set

    nlohmann::json to_json() const;
};

struct FederatedResult {
    nn::ModelCheckpoint checkpoint;
    std::vector<RoundLog> rounds;
};

// Seeded shuffle then contiguous slices whose sizes differ by at most 1.
std::vector<std::vector<size_t>> partition_equal(size_t n, size_t num_clients, uint64_t seed);

// Label-stratified index split (train, test); per-class proportions stay
// within one sample of train_fraction.
std::pair<std::vector<size_t>, std::vector<size_t>> stratified_split_indices(
    const std::vector<int>& labels, double train_fraction, uint64_t seed);

// w = sum_k (n_k / n) w_k elementwise; updates are summed in ascending
// client_id order so the result never depends on arrival order.
std::vector<nn::NamedTensor> aggregate(std::vector<ClientUpdate> updates);

// One FedAvg simulation: broadcast, local training (clients may run
// concurrently, per-client seed = seed ^ client_id ^ round), aggregate,
// evaluate. Fully deterministic for a fixed config.
FederatedResult run_federated_cnn_gru(const FederatedConfig& cfg,
                                      const std::vector<netflow::FeatureVector>& train,
                                      const std::vector<netflow::FeatureVector>& test);

// Graph variant: the topology is shared context, the labeled edge set is
// what gets partitioned across clients.
FederatedResult run_federated_egs(const FederatedConfig& cfg, const prov::ProvenanceGraph& g,
                                  const std::vector<size_t>& train_edges,
                                  const std::vector<size_t>& test_edges);

}  // namespace fedhunter::fed

#endif
