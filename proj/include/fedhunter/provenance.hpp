#ifndef FEDHUNTER_PROVENANCE_HPP
#define FEDHUNTER_PROVENANCE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedhunter/embedding.hpp"

namespace fedhunter::prov {

enum class NodeType { NetFlow, File, Subject, UnnamedPipe };
enum class EdgeType { Execute, Accept, ModifyProcess, CreateObject, Rename };

NodeType node_type_from_string(const std::string& s);
EdgeType edge_type_from_string(const std::string& s);
std::string to_string(NodeType t);
std::string to_string(EdgeType t);

struct ProvNode {
    std::string id;
    NodeType type = NodeType::Subject;
    std::map<std::string, std::string> attrs;
    std::vector<double> embedding;  // 384, unit norm or zero
};

struct ProvEdge {
    std::string id;
    EdgeType type = EdgeType::Execute;
    std::string src;
    std::string dst;
    std::map<std::string, std::string> attrs;
    std::vector<double> embedding;
    int label = 0;  // 0 benign, 1 attack
};

// Instantiates the per-type sentence template; missing attributes raise a
// DataError naming the key. UNNAMED_PIPE nodes render as the empty string.
std::string render_sentence(NodeType type, const std::map<std::string, std::string>& attrs);
std::string render_sentence(EdgeType type, const std::map<std::string, std::string>& attrs);

struct IncidentEdge {
    size_t edge_index;
    size_t neighbor;  // node index of the other endpoint
};

class ProvenanceGraph {
   public:
    ProvenanceGraph() = default;

    // Building; add_edge requires both endpoints to exist already.
    void add_node(ProvNode node);
    void add_edge(ProvEdge edge);

    size_t node_count() const { return nodes_.size(); }
    size_t edge_count() const { return edges_.size(); }
    const std::vector<ProvNode>& nodes() const { return nodes_; }
    const std::vector<ProvEdge>& edges() const { return edges_; }

    bool has_node(const std::string& id) const { return node_index_.count(id) > 0; }
    size_t node_index(const std::string& id) const;
    size_t edge_index(const std::string& id) const;
    size_t src_index(size_t edge_idx) const { return edge_endpoints_[edge_idx].first; }
    size_t dst_index(size_t edge_idx) const { return edge_endpoints_[edge_idx].second; }

    // Undirected incident edges, sorted by edge index so aggregation order
    // never depends on insertion order.
    const std::vector<IncidentEdge>& incident(size_t node_idx) const {
        return adjacency_[node_idx];
    }

    // Rebuilds adjacency from the edge list (consistency check hook).
    std::vector<std::vector<IncidentEdge>> rebuild_adjacency() const;
    const std::vector<std::vector<IncidentEdge>>& adjacency() const { return adjacency_; }

   private:
    std::vector<ProvNode> nodes_;
    std::vector<ProvEdge> edges_;
    std::map<std::string, size_t> node_index_;
    std::map<std::string, size_t> edge_index_;
    std::vector<std::pair<size_t, size_t>> edge_endpoints_;
    std::vector<std::vector<IncidentEdge>> adjacency_;
};

struct BuildReport {
    size_t nodes = 0;
    size_t edges = 0;
    std::vector<std::string> errors;  // non-fatal only when collecting
};

// Loads a JSONL event stream. Two passes by default: nodes first, then
// edges, so input order does not matter. Edges referencing unknown nodes
// and duplicate ids are fatal.
ProvenanceGraph build_graph(const std::string& jsonl_path, BuildReport* report = nullptr);
ProvenanceGraph build_graph_from_lines(const std::vector<std::string>& lines,
                                       BuildReport* report = nullptr);

// Induced subgraph containing every node within k undirected hops of the
// edge's endpoints plus all edges among those nodes.
ProvenanceGraph khop_subgraph(const ProvenanceGraph& graph, const std::string& edge_id, int k);

// Graph archive round-trip (JSON, format_version 1, embeddings included).
void save_graph(const ProvenanceGraph& graph, const std::string& path);
ProvenanceGraph load_graph(const std::string& path);

// DOT export; the score maps are optional decoration used by explanations.
std::string to_dot(const ProvenanceGraph& graph,
                   const std::map<std::string, double>* node_scores = nullptr,
                   const std::map<std::string, double>* edge_scores = nullptr,
                   const std::string& highlight_edge_id = "");

}  // namespace fedhunter::prov

#endif
