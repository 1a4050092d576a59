#include "fedhunter/synth.hpp"

#include <cmath>
#include <sstream>

#include "fedhunter/common.hpp"
#include "fedhunter/rng.hpp"
#include "nlohmann/json.hpp"

namespace fedhunter::synth {

using netflow::RawFlowRecord;
using nlohmann::json;

namespace {

std::string rand_ip(Rng& rng, const char* prefix) {
    return std::string(prefix) + std::to_string(rng.uniform_int(256)) + "." +
           std::to_string(1 + rng.uniform_int(254));
}

uint64_t pick(Rng& rng, std::initializer_list<uint64_t> values) {
    const size_t i = static_cast<size_t>(rng.uniform_int(values.size()));
    return *(values.begin() + i);
}

}  // namespace

std::vector<RawFlowRecord> synth_netflow(const NetflowSynthConfig& cfg) {
    if (cfg.attack_rate < 0.0 || cfg.attack_rate > 1.0) {
        throw UsageError("attack rate must be within [0,1]");
    }
    if (cfg.separation < 0.0 || cfg.separation > 1.0) {
        throw UsageError("separation must be within [0,1]");
    }
    const size_t n_attack =
        static_cast<size_t>(std::llround(cfg.attack_rate * static_cast<double>(cfg.n)));
    std::vector<int> labels(cfg.n, 0);
    for (size_t i = 0; i < n_attack && i < cfg.n; ++i) {
        labels[i] = 1;
    }
    Rng rng(cfg.seed);
    rng.shuffle(labels);

    const double s = cfg.separation;
    std::vector<RawFlowRecord> out;
    out.reserve(cfg.n);
    for (size_t i = 0; i < cfg.n; ++i) {
        RawFlowRecord r;
        r.label = labels[i];
        r.src_addr = rand_ip(rng, "10.0.");
        r.dst_addr = rand_ip(rng, "172.16.");
        r.l4_src_port = 49152 + rng.uniform_int(16384);
        if (r.label == 0) {
            r.protocol = rng.uniform() < 0.8 ? 6 : 17;
            r.l4_dst_port = pick(rng, {80, 443, 22, 53, 25, 8080});
            r.in_pkts = 1 + rng.uniform_int(10);
            r.out_pkts = 1 + rng.uniform_int(10);
            r.in_bytes = 40 + rng.uniform_int(360);
            r.out_bytes = 40 + rng.uniform_int(360);
            r.tcp_flags = pick(rng, {16, 24, 25, 27});
            r.flow_duration_ms = rng.uniform_int(300);
            r.l7_proto = pick(rng, {0, 5, 7, 91});
        } else {
            r.protocol = 6;
            const uint64_t port_lo = 1024 + static_cast<uint64_t>(s * 30000.0);
            r.l4_dst_port = port_lo + rng.uniform_int(65536 - port_lo);
            const uint64_t pkts_lo = 1 + static_cast<uint64_t>(s * 39.0);
            r.in_pkts = pkts_lo + rng.uniform_int(200);
            r.out_pkts = pkts_lo + rng.uniform_int(200);
            const uint64_t bytes_lo = 40 + static_cast<uint64_t>(s * 1760.0);
            r.in_bytes = bytes_lo + rng.uniform_int(8000);
            r.out_bytes = bytes_lo + rng.uniform_int(8000);
            r.tcp_flags = pick(rng, {2, 18});
            r.flow_duration_ms =
                static_cast<uint64_t>(s * 1200.0) + rng.uniform_int(30000);
            r.l7_proto = pick(rng, {0, 5, 7, 91});
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_netflow_csv(const std::vector<RawFlowRecord>& records, const std::string& path) {
    std::ostringstream out;
    out << "IPV4_SRC_ADDR,L4_SRC_PORT,IPV4_DST_ADDR,L4_DST_PORT,PROTOCOL,L7_PROTO,"
           "IN_BYTES,OUT_BYTES,IN_PKTS,OUT_PKTS,TCP_FLAGS,FLOW_DURATION_MILLISECONDS,Label\n";
    for (const auto& r : records) {
        out << r.src_addr << ',' << r.l4_src_port << ',' << r.dst_addr << ',' << r.l4_dst_port
            << ',' << r.protocol << ',' << r.l7_proto << ',' << r.in_bytes << ',' << r.out_bytes
            << ',' << r.in_pkts << ',' << r.out_pkts << ',' << r.tcp_flags << ','
            << r.flow_duration_ms << ',' << r.label << '\n';
    }
    atomic_write_file(path, out.str());
}

std::vector<std::string> synth_provenance_jsonl(const ProvenanceSynthConfig& cfg) {
    if (cfg.attack_rate < 0.0 || cfg.attack_rate > 1.0) {
        throw UsageError("attack rate must be within [0,1]");
    }
    if (cfg.nodes < 4) {
        throw UsageError("provenance generator needs at least 4 nodes");
    }
    Rng rng(cfg.seed);
    const size_t n_attack_nodes =
        std::max<size_t>(2, static_cast<size_t>(std::llround(0.02 * cfg.nodes)));
    const size_t n_attack_edges =
        static_cast<size_t>(std::llround(cfg.attack_rate * static_cast<double>(cfg.edges)));

    std::vector<std::string> lines;
    lines.reserve(cfg.nodes + cfg.edges);

    // nodes: the first n_attack_nodes subjects are the compromised pool
    for (size_t i = 0; i < cfg.nodes; ++i) {
        json j;
        j["kind"] = "node";
        j["id"] = "n" + std::to_string(i);
        if (i < n_attack_nodes) {
            j["type"] = "SUBJECT";
            j["attrs"] = {{"sub_type", "process"}};
        } else {
            const double roll = rng.uniform();
            if (roll < 0.4) {
                j["type"] = "SUBJECT";
                j["attrs"] = {{"sub_type", "process"}};
            } else if (roll < 0.7) {
                j["type"] = "FILE";
                j["attrs"] = {{"sub_type", rng.uniform() < 0.5 ? "file" : "dir"}};
            } else if (roll < 0.9) {
                j["type"] = "NET_FLOW";
                j["attrs"] = {{"local_address", rand_ip(rng, "10.1.")},
                              {"local_port", std::to_string(1024 + rng.uniform_int(60000))},
                              {"remote_address", rand_ip(rng, "172.17.")},
                              {"remote_port", std::to_string(1024 + rng.uniform_int(60000))}};
            } else {
                j["type"] = "UNNAMED_PIPE";
                j["attrs"] = json::object();
            }
        }
        lines.push_back(j.dump());
    }

    static const char* kBenignExec[] = {"imapd", "nginx", "sshd", "cron", "postfix"};
    static const char* kAttackExec[] = {"drakon", "nginx_backdoor", "shadowsh"};
    auto benign_exec = [&] { return kBenignExec[rng.uniform_int(5)]; };
    auto attack_exec = [&] { return kAttackExec[rng.uniform_int(3)]; };

    std::vector<int> edge_labels(cfg.edges, 0);
    for (size_t i = 0; i < n_attack_edges && i < cfg.edges; ++i) {
        edge_labels[i] = 1;
    }
    rng.shuffle(edge_labels);

    for (size_t i = 0; i < cfg.edges; ++i) {
        json j;
        j["kind"] = "edge";
        j["id"] = "e" + std::to_string(i);
        j["label"] = edge_labels[i];
        if (edge_labels[i] == 1) {
            // attack events stay inside the compromised pool
            j["src"] = "n" + std::to_string(rng.uniform_int(n_attack_nodes));
            j["dst"] = "n" + std::to_string(rng.uniform_int(n_attack_nodes));
            const double roll = rng.uniform();
            if (roll < 0.5) {
                j["type"] = "MODIFY_PROCESS";
                j["attrs"] = {{"exec", attack_exec()}};
            } else if (roll < 0.8) {
                j["type"] = "EXECUTE";
                j["attrs"] = {{"exec", attack_exec()},
                              {"cmd_line", std::string(attack_exec()) + " --listen"}};
            } else {
                j["type"] = "CREATE_OBJECT";
                j["attrs"] = {{"exec", attack_exec()}};
            }
        } else {
            // benign events mostly avoid the compromised pool but touch
            // it occasionally so the graph stays connected
            const size_t src = rng.uniform() < 0.05
                                   ? rng.uniform_int(n_attack_nodes)
                                   : n_attack_nodes + rng.uniform_int(cfg.nodes - n_attack_nodes);
            const size_t dst = n_attack_nodes + rng.uniform_int(cfg.nodes - n_attack_nodes);
            j["src"] = "n" + std::to_string(src);
            j["dst"] = "n" + std::to_string(dst);
            const double roll = rng.uniform();
            if (roll < 0.35) {
                j["type"] = "MODIFY_PROCESS";
                j["attrs"] = {{"exec", benign_exec()}};
            } else if (roll < 0.6) {
                j["type"] = "EXECUTE";
                j["attrs"] = {{"exec", benign_exec()},
                              {"cmd_line", std::string(benign_exec()) + " -d"}};
            } else if (roll < 0.8) {
                j["type"] = "RENAME";
                j["attrs"] = {{"exec", benign_exec()}};
            } else if (roll < 0.9) {
                j["type"] = "CREATE_OBJECT";
                j["attrs"] = {{"exec", benign_exec()}};
            } else {
                j["type"] = "ACCEPT";
                j["attrs"] = {{"address", rand_ip(rng, "192.168.")},
                              {"port", std::to_string(1024 + rng.uniform_int(60000))},
                              {"exec", benign_exec()}};
            }
        }
        lines.push_back(j.dump());
    }
    return lines;
}

}  // namespace fedhunter::synth
