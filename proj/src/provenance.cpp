#include "fedhunter/provenance.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "fedhunter/common.hpp"
#include "nlohmann/json.hpp"

namespace fedhunter::prov {

using nlohmann::json;

NodeType node_type_from_string(const std::string& s) {
    if (s == "NET_FLOW") return NodeType::NetFlow;
    if (s == "FILE") return NodeType::File;
    if (s == "SUBJECT") return NodeType::Subject;
    if (s == "UNNAMED_PIPE") return NodeType::UnnamedPipe;
    throw DataError("unknown node type: " + s);
}

EdgeType edge_type_from_string(const std::string& s) {
    if (s == "EXECUTE") return EdgeType::Execute;
    if (s == "ACCEPT") return EdgeType::Accept;
    if (s == "MODIFY_PROCESS") return EdgeType::ModifyProcess;
    if (s == "CREATE_OBJECT") return EdgeType::CreateObject;
    if (s == "RENAME") return EdgeType::Rename;
    throw DataError("unknown edge type: " + s);
}

std::string to_string(NodeType t) {
    switch (t) {
        case NodeType::NetFlow: return "NET_FLOW";
        case NodeType::File: return "FILE";
        case NodeType::Subject: return "SUBJECT";
        case NodeType::UnnamedPipe: return "UNNAMED_PIPE";
    }
    return "?";
}

std::string to_string(EdgeType t) {
    switch (t) {
        case EdgeType::Execute: return "EXECUTE";
        case EdgeType::Accept: return "ACCEPT";
        case EdgeType::ModifyProcess: return "MODIFY_PROCESS";
        case EdgeType::CreateObject: return "CREATE_OBJECT";
        case EdgeType::Rename: return "RENAME";
    }
    return "?";
}

namespace {

// Replaces {{key}} placeholders from attrs; any missing key is an error.
std::string instantiate(const std::string& tmpl, const std::map<std::string, std::string>& attrs) {
    std::string out;
    size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
            const size_t end = tmpl.find("}}", i + 2);
            const std::string key = tmpl.substr(i + 2, end - i - 2);
            auto it = attrs.find(key);
            if (it == attrs.end()) {
                throw DataError("sentence template missing attribute: " + key);
            }
            out += it->second;
            i = end + 2;
        } else {
            out += tmpl[i++];
        }
    }
    return out;
}

}  // namespace

std::string render_sentence(NodeType type, const std::map<std::string, std::string>& attrs) {
    switch (type) {
        case NodeType::NetFlow:
            return instantiate(
                "A \"net_flow\" node has a local address of {{local_address}}, "
                "a local port of {{local_port}}, a remote address of {{remote_address}}, "
                "and a remote port of {{remote_port}}.",
                attrs);
        case NodeType::File:
            return instantiate("A \"file\" node has the subtype of \"{{sub_type}}\".", attrs);
        case NodeType::Subject:
            return instantiate("A \"subject\" node the has subtype of \"{{sub_type}}\".", attrs);
        case NodeType::UnnamedPipe:
            return "";
    }
    return "";
}

std::string render_sentence(EdgeType type, const std::map<std::string, std::string>& attrs) {
    switch (type) {
        case EdgeType::Execute:
            return instantiate(
                "A \"execute\" edge executed the \"{{exec}}\" program, "
                "and its command line is \"{{cmd_line}}\".",
                attrs);
        case EdgeType::Accept:
            // source table carries "rename" here; kept verbatim
            return instantiate(
                "An \"rename\" edge accepted the connection from {{address}} "
                "with the port of {{port}}, and it executed the \"{{exec}}\" program.",
                attrs);
        case EdgeType::ModifyProcess:
            return instantiate("An \"modify_process\" edge executed the \"{{exec}}\" program.",
                               attrs);
        case EdgeType::CreateObject:
            return instantiate("An \"create_object\" edge executed the \"{{exec}}\" program.",
                               attrs);
        case EdgeType::Rename:
            return instantiate("An \"rename\" edge executed the \"{{exec}}\" program.", attrs);
    }
    return "";
}

size_t ProvenanceGraph::node_index(const std::string& id) const {
    auto it = node_index_.find(id);
    if (it == node_index_.end()) {
        throw DataError("unknown node id: " + id);
    }
    return it->second;
}

size_t ProvenanceGraph::edge_index(const std::string& id) const {
    auto it = edge_index_.find(id);
    if (it == edge_index_.end()) {
        throw DataError("unknown edge id: " + id);
    }
    return it->second;
}

void ProvenanceGraph::add_node(ProvNode node) {
    if (node_index_.count(node.id)) {
        throw DataError("duplicate node id: " + node.id);
    }
    if (node.embedding.empty()) {
        node.embedding = embed_sentence(render_sentence(node.type, node.attrs));
    }
    if (node.embedding.size() != kEmbeddingDim) {
        throw DataError("node " + node.id + " embedding dimension != 384");
    }
    node_index_[node.id] = nodes_.size();
    nodes_.push_back(std::move(node));
    adjacency_.emplace_back();
}

void ProvenanceGraph::add_edge(ProvEdge edge) {
    if (edge_index_.count(edge.id)) {
        throw DataError("duplicate edge id: " + edge.id);
    }
    auto src_it = node_index_.find(edge.src);
    auto dst_it = node_index_.find(edge.dst);
    if (src_it == node_index_.end() || dst_it == node_index_.end()) {
        std::string missing;
        if (src_it == node_index_.end()) missing += edge.src;
        if (dst_it == node_index_.end()) missing += (missing.empty() ? "" : ", ") + edge.dst;
        throw DataError("edge " + edge.id + " references unknown node(s): " + missing);
    }
    if (edge.label != 0 && edge.label != 1) {
        throw DataError("edge " + edge.id + " label must be 0 or 1");
    }
    if (edge.embedding.empty()) {
        edge.embedding = embed_sentence(render_sentence(edge.type, edge.attrs));
    }
    if (edge.embedding.size() != kEmbeddingDim) {
        throw DataError("edge " + edge.id + " embedding dimension != 384");
    }
    const size_t e = edges_.size();
    const size_t s = src_it->second;
    const size_t d = dst_it->second;
    edge_index_[edge.id] = e;
    edges_.push_back(std::move(edge));
    edge_endpoints_.emplace_back(s, d);
    // incident lists stay sorted by edge id so downstream aggregation
    // never depends on insertion order
    auto sorted_insert = [this](std::vector<IncidentEdge>& list, IncidentEdge ie) {
        auto pos = std::lower_bound(list.begin(), list.end(), ie,
                                    [this](const IncidentEdge& a, const IncidentEdge& b) {
                                        return edges_[a.edge_index].id < edges_[b.edge_index].id;
                                    });
        list.insert(pos, ie);
    };
    sorted_insert(adjacency_[s], {e, d});
    if (d != s) {
        sorted_insert(adjacency_[d], {e, s});
    }
}

std::vector<std::vector<IncidentEdge>> ProvenanceGraph::rebuild_adjacency() const {
    std::vector<std::vector<IncidentEdge>> adj(nodes_.size());
    for (size_t e = 0; e < edges_.size(); ++e) {
        const auto [s, d] = edge_endpoints_[e];
        adj[s].push_back({e, d});
        if (d != s) {
            adj[d].push_back({e, s});
        }
    }
    for (auto& list : adj) {
        std::sort(list.begin(), list.end(), [this](const IncidentEdge& a, const IncidentEdge& b) {
            return edges_[a.edge_index].id < edges_[b.edge_index].id;
        });
    }
    return adj;
}

namespace {

ProvNode parse_node(const json& j) {
    ProvNode n;
    n.id = j.at("id").get<std::string>();
    n.type = node_type_from_string(j.at("type").get<std::string>());
    if (j.contains("attrs")) {
        for (auto it = j.at("attrs").begin(); it != j.at("attrs").end(); ++it) {
            n.attrs[it.key()] = it.value().is_string() ? it.value().get<std::string>()
                                                       : it.value().dump();
        }
    }
    return n;
}

ProvEdge parse_edge(const json& j) {
    ProvEdge e;
    e.id = j.at("id").get<std::string>();
    e.type = edge_type_from_string(j.at("type").get<std::string>());
    e.src = j.at("src").get<std::string>();
    e.dst = j.at("dst").get<std::string>();
    e.label = j.at("label").get<int>();
    if (j.contains("attrs")) {
        for (auto it = j.at("attrs").begin(); it != j.at("attrs").end(); ++it) {
            e.attrs[it.key()] = it.value().is_string() ? it.value().get<std::string>()
                                                       : it.value().dump();
        }
    }
    return e;
}

}  // namespace

ProvenanceGraph build_graph_from_lines(const std::vector<std::string>& lines,
                                       BuildReport* report) {
    ProvenanceGraph g;
    // pass 1: nodes
    size_t line_no = 0;
    for (const auto& line : lines) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("JSONL parse error at line " + std::to_string(line_no) + ": " +
                            e.what());
        }
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "node") {
            g.add_node(parse_node(j));
        } else if (kind != "edge") {
            throw DataError("unknown record kind '" + kind + "' at line " +
                            std::to_string(line_no));
        }
    }
    // pass 2: edges
    line_no = 0;
    for (const auto& line : lines) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) {
            continue;
        }
        const json j = json::parse(line);
        if (j.at("kind").get<std::string>() == "edge") {
            g.add_edge(parse_edge(j));
        }
    }
    if (report) {
        report->nodes = g.node_count();
        report->edges = g.edge_count();
    }
    return g;
}

ProvenanceGraph build_graph(const std::string& jsonl_path, BuildReport* report) {
    std::ifstream in(jsonl_path);
    if (!in) {
        throw DataError("cannot open event stream: " + jsonl_path);
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        lines.push_back(line);
    }
    return build_graph_from_lines(lines, report);
}

ProvenanceGraph khop_subgraph(const ProvenanceGraph& graph, const std::string& edge_id, int k) {
    if (k < 1) {
        throw UsageError("hop count must be >= 1");
    }
    const size_t target = graph.edge_index(edge_id);
    // BFS out to depth k from both endpoints
    std::vector<int> depth(graph.node_count(), -1);
    std::deque<size_t> queue;
    for (size_t start : {graph.src_index(target), graph.dst_index(target)}) {
        if (depth[start] != 0) {
            depth[start] = 0;
            queue.push_back(start);
        }
    }
    while (!queue.empty()) {
        const size_t v = queue.front();
        queue.pop_front();
        if (depth[v] >= k) {
            continue;
        }
        for (const auto& inc : graph.incident(v)) {
            if (depth[inc.neighbor] < 0) {
                depth[inc.neighbor] = depth[v] + 1;
                queue.push_back(inc.neighbor);
            }
        }
    }
    ProvenanceGraph sub;
    for (size_t v = 0; v < graph.node_count(); ++v) {
        if (depth[v] >= 0) {
            sub.add_node(graph.nodes()[v]);
        }
    }
    for (size_t e = 0; e < graph.edge_count(); ++e) {
        if (depth[graph.src_index(e)] >= 0 && depth[graph.dst_index(e)] >= 0) {
            sub.add_edge(graph.edges()[e]);
        }
    }
    return sub;
}

namespace {

json attrs_to_json(const std::map<std::string, std::string>& attrs) {
    json j = json::object();
    for (const auto& [k, v] : attrs) {
        j[k] = v;
    }
    return j;
}

}  // namespace

void save_graph(const ProvenanceGraph& graph, const std::string& path) {
    json nodes = json::array();
    for (const auto& n : graph.nodes()) {
        nodes.push_back({{"id", n.id},
                         {"type", to_string(n.type)},
                         {"attrs", attrs_to_json(n.attrs)},
                         {"embedding", n.embedding}});
    }
    json edges = json::array();
    for (const auto& e : graph.edges()) {
        edges.push_back({{"id", e.id},
                         {"type", to_string(e.type)},
                         {"src", e.src},
                         {"dst", e.dst},
                         {"attrs", attrs_to_json(e.attrs)},
                         {"label", e.label},
                         {"embedding", e.embedding}});
    }
    const json root = {{"format_version", 1}, {"nodes", nodes}, {"edges", edges}};
    atomic_write_file(path, root.dump() + "\n");
}

ProvenanceGraph load_graph(const std::string& path) {
    json root;
    try {
        root = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw DataError("graph archive parse error in " + path + ": " + e.what());
    }
    if (root.value("format_version", 0) != 1) {
        throw DataError("unsupported graph archive version in " + path);
    }
    ProvenanceGraph g;
    for (const auto& j : root.at("nodes")) {
        ProvNode n = parse_node(j);
        if (j.contains("embedding")) {
            n.embedding = j.at("embedding").get<std::vector<double>>();
        }
        g.add_node(std::move(n));
    }
    for (const auto& j : root.at("edges")) {
        ProvEdge e = parse_edge(j);
        if (j.contains("embedding")) {
            e.embedding = j.at("embedding").get<std::vector<double>>();
        }
        g.add_edge(std::move(e));
    }
    return g;
}

std::string to_dot(const ProvenanceGraph& graph, const std::map<std::string, double>* node_scores,
                   const std::map<std::string, double>* edge_scores,
                   const std::string& highlight_edge_id) {
    std::ostringstream out;
    out << "digraph provenance {\n";
    char buf[64];
    for (const auto& n : graph.nodes()) {
        out << "  \"" << n.id << "\" [label=\"" << n.id;
        if (node_scores && node_scores->count(n.id)) {
            std::snprintf(buf, sizeof(buf), "%.4f", node_scores->at(n.id));
            out << "\\nscore=" << buf;
        }
        out << "\"];\n";
    }
    for (const auto& e : graph.edges()) {
        out << "  \"" << e.src << "\" -> \"" << e.dst << "\" [label=\"class=" << e.label;
        if (edge_scores && edge_scores->count(e.id)) {
            std::snprintf(buf, sizeof(buf), "%.4f", edge_scores->at(e.id));
            out << ", score=" << buf;
        }
        out << "\"";
        if (e.id == highlight_edge_id) {
            out << ", color=red";
        }
        out << "];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace fedhunter::prov
