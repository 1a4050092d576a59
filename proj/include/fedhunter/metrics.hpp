#ifndef FEDHUNTER_METRICS_HPP
#define FEDHUNTER_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

namespace fedhunter::detect {

struct ConfusionCounts {
    uint64_t tp = 0;
    uint64_t tn = 0;
    uint64_t fp = 0;
    uint64_t fn = 0;

    uint64_t total() const { return tp + tn + fp + fn; }
};

// Zero-denominator metrics are reported as undefined, never as silent 0.
struct DetectionReport {
    ConfusionCounts counts;
    double threshold = 0.5;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_defined = false;
    bool recall_defined = false;
    bool f1_defined = false;

    nlohmann::json to_json() const;
};

// attack_probs[i] is p(attack); predicted attack iff p > threshold.
DetectionReport evaluate_predictions(const std::vector<double>& attack_probs,
                                     const std::vector<int>& labels, double threshold);

DetectionReport report_from_counts(const ConfusionCounts& counts, double threshold);

}  // namespace fedhunter::detect

#endif
