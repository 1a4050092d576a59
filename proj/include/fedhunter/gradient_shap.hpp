#ifndef FEDHUNTER_GRADIENT_SHAP_HPP
#define FEDHUNTER_GRADIENT_SHAP_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fedhunter/egraphsage.hpp"
#include "fedhunter/provenance.hpp"
#include "fedhunter/shap.hpp"

namespace fedhunter::shap {

// f(x) together with its input gradient.
using ValueGradFn =
    std::function<std::pair<double, std::vector<double>>(const std::vector<double>&)>;

struct GradientShapConfig {
    size_t n_samples = 50;
    std::vector<double> baseline;  // required; callers resolve their default
    enum class Mode { ExpectedGradients, PaperLiteral };
    Mode mode = Mode::ExpectedGradients;
    uint64_t seed = 0;
};

// Expected-gradients estimate: average the input gradient over seeded
// interpolation points x^j = baseline + alpha_j (x - baseline).
//   expected_gradients: phi_i = (x_i - baseline_i) * mean_j grad_i(x^j)
//   paper_literal:      phi_i = w_i * mean_j grad_i(x^j),
//                       w_i = (x_i - baseline_i) / sum_k (x_k - baseline_k)
// phi0 = f(baseline). x == baseline short-circuits to all-zero phi.
ShapExplanation gradient_shap(const ValueGradFn& f, const std::vector<double>& x,
                              const GradientShapConfig& cfg);

struct SubgraphExplanation {
    std::string edge_id;
    int predicted_class = 0;
    std::string center_node;
    std::map<std::string, double> node_scores;  // scaled into [0,1], max node = 1
    std::map<std::string, double> edge_scores;
    int hops = 1;
    std::string mode;
    uint64_t seed = 0;
    prov::ProvenanceGraph subgraph;

    nlohmann::json to_json() const;
    std::string to_dot() const;
};

// Node-centered sub-graph explanation: extract the k-hop subgraph around
// the edge, attribute the predicted-class probability to every node and
// edge feature entry with gradient_shap (zero baseline by default), then
// fold |summed contributions| per node/edge and scale by the maxima.
SubgraphExplanation explain_edge(const detect::EGraphSageModel& model,
                                 const prov::ProvenanceGraph& graph, const std::string& edge_id,
                                 int hops, const GradientShapConfig& cfg);

}  // namespace fedhunter::shap

#endif
