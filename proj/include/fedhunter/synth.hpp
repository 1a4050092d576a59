#ifndef FEDHUNTER_SYNTH_HPP
#define FEDHUNTER_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fedhunter/netflow.hpp"

namespace fedhunter::synth {

// Class-separable flow generator. separation=1 keeps the class supports
// disjoint in packet/byte counts, destination port and duration;
// separation=0 collapses the attack ranges onto the benign ones.
struct NetflowSynthConfig {
    size_t n = 1000;
    double separation = 1.0;
    double attack_rate = 0.5;
    uint64_t seed = 0;
};

std::vector<netflow::RawFlowRecord> synth_netflow(const NetflowSynthConfig& cfg);
void write_netflow_csv(const std::vector<netflow::RawFlowRecord>& records,
                       const std::string& path);

// Provenance event generator. A small pool of compromised subjects
// carries the attack edges (distinct programs in the event sentences);
// benign activity occasionally touches those subjects so the clusters
// stay connected.
struct ProvenanceSynthConfig {
    size_t nodes = 500;
    size_t edges = 2000;
    double attack_rate = 0.007;
    uint64_t seed = 0;
};

std::vector<std::string> synth_provenance_jsonl(const ProvenanceSynthConfig& cfg);

}  // namespace fedhunter::synth

#endif
