#include "fedhunter/metrics.hpp"

#include "fedhunter/common.hpp"

namespace fedhunter::detect {

using nlohmann::json;

DetectionReport report_from_counts(const ConfusionCounts& c, double threshold) {
    DetectionReport r;
    r.counts = c;
    r.threshold = threshold;
    const double tp = static_cast<double>(c.tp);
    const double tn = static_cast<double>(c.tn);
    const double fp = static_cast<double>(c.fp);
    const double fn = static_cast<double>(c.fn);
    const double total = tp + tn + fp + fn;
    if (total > 0.0) {
        r.accuracy = (tp + tn) / total;
    }
    if (c.tp + c.fp > 0) {
        r.precision = tp / (tp + fp);
        r.precision_defined = true;
    }
    if (c.tp + c.fn > 0) {
        r.recall = tp / (tp + fn);
        r.recall_defined = true;
    }
    if (r.precision_defined && r.recall_defined && r.precision + r.recall > 0.0) {
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
        r.f1_defined = true;
    }
    return r;
}

DetectionReport evaluate_predictions(const std::vector<double>& attack_probs,
                                     const std::vector<int>& labels, double threshold) {
    if (attack_probs.empty() || attack_probs.size() != labels.size()) {
        throw DataError("evaluate: probabilities and labels must be nonempty and equal-length");
    }
    ConfusionCounts c;
    for (size_t i = 0; i < attack_probs.size(); ++i) {
        const bool pred = attack_probs[i] > threshold;
        const bool truth = labels[i] == 1;
        if (pred && truth) ++c.tp;
        else if (!pred && !truth) ++c.tn;
        else if (pred && !truth) ++c.fp;
        else ++c.fn;
    }
    return report_from_counts(c, threshold);
}

json DetectionReport::to_json() const {
    json undefined = json::array();
    if (!precision_defined) undefined.push_back("precision");
    if (!recall_defined) undefined.push_back("recall");
    if (!f1_defined) undefined.push_back("f1");
    return {
        {"counts", {{"tp", counts.tp}, {"tn", counts.tn}, {"fp", counts.fp}, {"fn", counts.fn}}},
        {"metrics",
         {{"accuracy", accuracy},
          {"precision", precision_defined ? json(precision) : json()},
          {"recall", recall_defined ? json(recall) : json()},
          {"f1", f1_defined ? json(f1) : json()}}},
        {"threshold", threshold},
        {"undefined_flags", undefined},
    };
}

}  // namespace fedhunter::detect
