#include "fedhunter/gradient_shap.hpp"

#include <algorithm>
#include <cmath>

#include "fedhunter/common.hpp"
#include "fedhunter/rng.hpp"

namespace fedhunter::shap {

using nlohmann::json;

ShapExplanation gradient_shap(const ValueGradFn& f, const std::vector<double>& x,
                              const GradientShapConfig& cfg) {
    if (cfg.n_samples == 0) {
        throw UsageError("gradient_shap needs n_samples >= 1");
    }
    if (cfg.baseline.size() != x.size()) {
        throw DataError("gradient_shap baseline dimension " + std::to_string(cfg.baseline.size()) +
                        " != instance dimension " + std::to_string(x.size()));
    }
    const size_t m = x.size();
    ShapExplanation ex;
    ex.mode = cfg.mode == GradientShapConfig::Mode::ExpectedGradients ? "expected_gradients"
                                                                      : "paper_literal";
    ex.seed = cfg.seed;
    ex.phi.assign(m, 0.0);
    ex.phi0 = f(cfg.baseline).first;
    ex.f_x = f(x).first;

    std::vector<double> disp(m);
    bool any_disp = false;
    for (size_t i = 0; i < m; ++i) {
        disp[i] = x[i] - cfg.baseline[i];
        any_disp = any_disp || disp[i] != 0.0;
    }
    if (!any_disp) {
        return ex;  // zero displacement: every contribution vanishes
    }

    Rng rng(cfg.seed);
    std::vector<double> mean_grad(m, 0.0);
    std::vector<double> probe(m);
    for (size_t j = 0; j < cfg.n_samples; ++j) {
        const double alpha = rng.uniform();
        for (size_t i = 0; i < m; ++i) {
            probe[i] = cfg.baseline[i] + alpha * disp[i];
        }
        const auto [value, grad] = f(probe);
        (void)value;
        if (grad.size() != m) {
            throw DataError("gradient_shap: model gradient has wrong dimension");
        }
        for (size_t i = 0; i < m; ++i) {
            mean_grad[i] += grad[i];
        }
    }
    for (size_t i = 0; i < m; ++i) {
        mean_grad[i] /= static_cast<double>(cfg.n_samples);
    }

    if (cfg.mode == GradientShapConfig::Mode::ExpectedGradients) {
        for (size_t i = 0; i < m; ++i) {
            ex.phi[i] = disp[i] * mean_grad[i];
        }
    } else {
        double denom = 0.0;
        for (double d : disp) {
            denom += d;
        }
        if (denom == 0.0) {
            throw NumericError(
                "paper_literal weights are degenerate: displacements sum to zero");
        }
        for (size_t i = 0; i < m; ++i) {
            ex.phi[i] = (disp[i] / denom) * mean_grad[i];
        }
    }
    return ex;
}

json SubgraphExplanation::to_json() const {
    json nodes = json::object();
    for (const auto& [id, s] : node_scores) {
        nodes[id] = s;
    }
    json edges = json::object();
    for (const auto& [id, s] : edge_scores) {
        edges[id] = s;
    }
    return {{"edge_id", edge_id},        {"predicted_class", predicted_class},
            {"center_node", center_node}, {"node_scores", nodes},
            {"edge_scores", edges},       {"hops", hops},
            {"mode", mode},               {"seed", seed}};
}

std::string SubgraphExplanation::to_dot() const {
    return prov::to_dot(subgraph, &node_scores, &edge_scores, edge_id);
}

SubgraphExplanation explain_edge(const detect::EGraphSageModel& model,
                                 const prov::ProvenanceGraph& graph, const std::string& edge_id,
                                 int hops, const GradientShapConfig& cfg) {
    SubgraphExplanation out;
    out.edge_id = edge_id;
    out.hops = hops;
    out.seed = cfg.seed;
    out.subgraph = prov::khop_subgraph(graph, edge_id, hops);
    const prov::ProvenanceGraph& sub = out.subgraph;
    const size_t n = sub.node_count();
    const size_t e = sub.edge_count();
    const size_t fdim = detect::EGraphSageModel::kFeatureDim;
    const size_t target = sub.edge_index(edge_id);

    // actual inputs: node features first, then edge features
    std::vector<double> actual(n * fdim + e * fdim);
    for (size_t v = 0; v < n; ++v) {
        std::copy(sub.nodes()[v].embedding.begin(), sub.nodes()[v].embedding.end(),
                  actual.begin() + v * fdim);
    }
    for (size_t i = 0; i < e; ++i) {
        std::copy(sub.edges()[i].embedding.begin(), sub.edges()[i].embedding.end(),
                  actual.begin() + (n + i) * fdim);
    }

    // predicted class on the subgraph at the actual features
    detect::EGraphSageModel scratch = model;
    {
        const std::vector<double> probs = scratch.forward(sub, false, nullptr, nullptr);
        out.predicted_class = probs[target * 2 + 1] > probs[target * 2] ? 1 : 0;
    }

    const int cls = out.predicted_class;
    ValueGradFn fn = [&](const std::vector<double>& packed) {
        std::vector<double> node_feats(packed.begin(), packed.begin() + n * fdim);
        std::vector<double> edge_feats(packed.begin() + n * fdim, packed.end());
        detect::EGraphSageModel::Cache cache;
        const std::vector<double> probs =
            scratch.forward(sub, false, nullptr, &cache, &node_feats, &edge_feats);
        const double p = probs[target * 2 + cls];
        // d p_cls / d logit_k = p_cls (delta - p_k)
        std::vector<double> dlogits(e * 2, 0.0);
        for (int k = 0; k < 2; ++k) {
            dlogits[target * 2 + k] = p * ((k == cls ? 1.0 : 0.0) - probs[target * 2 + k]);
        }
        scratch.zero_grad();
        const auto grads = scratch.backward(cache, dlogits);
        std::vector<double> packed_grad(packed.size());
        std::copy(grads.node_feats.begin(), grads.node_feats.end(), packed_grad.begin());
        std::copy(grads.edge_feats.begin(), grads.edge_feats.end(),
                  packed_grad.begin() + n * fdim);
        return std::make_pair(p, std::move(packed_grad));
    };

    GradientShapConfig local = cfg;
    if (local.baseline.empty()) {
        local.baseline.assign(actual.size(), 0.0);
    }
    if (local.baseline.size() != actual.size()) {
        throw DataError("explain_edge baseline must cover every packed feature entry");
    }
    const ShapExplanation shap = gradient_shap(fn, actual, local);
    out.mode = shap.mode;

    // fold per-entity: importance = |sum of the entity's feature phis|
    std::vector<double> node_imp(n, 0.0), edge_imp(e, 0.0);
    for (size_t v = 0; v < n; ++v) {
        double s = 0.0;
        for (size_t i = 0; i < fdim; ++i) {
            s += shap.phi[v * fdim + i];
        }
        node_imp[v] = std::fabs(s);
    }
    for (size_t i = 0; i < e; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < fdim; ++j) {
            s += shap.phi[(n + i) * fdim + j];
        }
        edge_imp[i] = std::fabs(s);
    }
    const double node_max = *std::max_element(node_imp.begin(), node_imp.end());
    const double edge_max = e ? *std::max_element(edge_imp.begin(), edge_imp.end()) : 0.0;
    for (size_t v = 0; v < n; ++v) {
        out.node_scores[sub.nodes()[v].id] = node_max > 0.0 ? node_imp[v] / node_max : 0.0;
    }
    for (size_t i = 0; i < e; ++i) {
        out.edge_scores[sub.edges()[i].id] = edge_max > 0.0 ? edge_imp[i] / edge_max : 0.0;
    }

    const std::string& src_id = sub.edges()[target].src;
    const std::string& dst_id = sub.edges()[target].dst;
    out.center_node =
        out.node_scores[dst_id] > out.node_scores[src_id] ? dst_id : src_id;
    return out;
}

}  // namespace fedhunter::shap
