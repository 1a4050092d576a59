// End-to-end checks of the fedhunter binary: artifact production,
// manifests, exit codes and replay. The binary path comes from
// FEDHUNTER_BIN (set by ctest).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "fedhunter/common.hpp"
#include "nlohmann/json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string bin() {
    const char* env = std::getenv("FEDHUNTER_BIN");
    REQUIRE_MESSAGE(env != nullptr, "FEDHUNTER_BIN must point at the CLI binary");
    return env;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("fh_cli_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args, const std::string& log = "/dev/null") {
    const std::string cmd = bin() + " " + args + " > " + log + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) { return fedhunter::read_file(path); }

}  // namespace

TEST_CASE("synth netflow: deterministic files, attack rate within one sample") {
    TempDir dir;
    const auto a = dir.file("a.csv");
    const auto b = dir.file("b.csv");
    const auto c = dir.file("c.csv");
    CHECK(run("synth netflow --n 500 --seed 9 --attack-rate 0.25 --output " + a) == 0);
    CHECK(run("synth netflow --n 500 --seed 9 --attack-rate 0.25 --output " + b) == 0);
    CHECK(run("synth netflow --n 500 --seed 10 --attack-rate 0.25 --output " + c) == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a) != slurp(c));
    // count labels
    std::istringstream in(slurp(a));
    std::string line;
    std::getline(in, line);  // header
    size_t attacks = 0, rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        attacks += line.size() >= 2 && line.substr(line.size() - 2) == ",1";
    }
    CHECK(rows == 500);
    CHECK(attacks == 125);
    CHECK(fs::exists(a + ".manifest.json"));
}

TEST_CASE("synth provenance honors the attack rate exactly") {
    TempDir dir;
    const auto out = dir.file("ev.jsonl");
    CHECK(run("synth provenance --nodes 200 --edges 1000 --attack-rate 0.007 --seed 3 --output " +
              out) == 0);
    std::istringstream in(slurp(out));
    std::string line;
    size_t attack_edges = 0, edges = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        if (j.at("kind") == "edge") {
            ++edges;
            attack_edges += j.at("label").get<int>() == 1;
        }
    }
    CHECK(edges == 1000);
    CHECK(attack_edges == 7);  // round(1000 * 0.007)
}

TEST_CASE("usage errors exit 2, data errors exit 3") {
    TempDir dir;
    CHECK(run("preprocess netflow --output x.json") == 2);          // missing --input
    CHECK(run("train --model cnn-gru") == 2);                        // missing required flags
    CHECK(run("synth netflow --n 10 --attack-rate 1.5 --output " + dir.file("x.csv")) == 2);
    CHECK(run("preprocess netflow --input " + dir.file("missing.csv") + " --output " +
              dir.file("y.json")) == 3);
    CHECK(run("nonsense") == 2);
}

TEST_CASE("full pipeline: preprocess, train, explain, quality, replay") {
    TempDir dir;
    const auto csv = dir.file("flows.csv");
    const auto feats = dir.file("flows.json");
    const auto ckpt = dir.file("model.json");
    const auto roundlog = dir.file("rounds.jsonl");
    REQUIRE(run("synth netflow --n 300 --seed 21 --output " + csv) == 0);
    REQUIRE(run("preprocess netflow --input " + csv + " --output " + feats) == 0);

    const std::string train_args = "train --model cnn-gru --data " + feats + " --output " + ckpt +
                                   " --roundlog " + roundlog +
                                   " --clients 2 --rounds 2 --epochs 2 --batch-size 16 --seed 4";
    REQUIRE(run(train_args) == 0);
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(roundlog));
    CHECK(fs::exists(ckpt + ".manifest.json"));

    SUBCASE("identical invocation reproduces identical checkpoint bytes") {
        const std::string first = slurp(ckpt);
        REQUIRE(run(train_args) == 0);
        CHECK(slurp(ckpt) == first);
    }

    SUBCASE("roundlog is valid JSONL with one entry per round") {
        std::istringstream in(slurp(roundlog));
        std::string line;
        size_t rounds = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line);
            CHECK(j.at("round") == rounds);
            CHECK(j.contains("client_losses"));
            CHECK(j.at("report").contains("metrics"));
            ++rounds;
        }
        CHECK(rounds == 2);
    }

    SUBCASE("kernel-shap explanation has one phi entry per feature") {
        const auto out = dir.file("ks.json");
        REQUIRE(run("explain kernel-shap --checkpoint " + ckpt + " --data " + feats +
                    " --instance-index 0 --background 16 --seed 2 --output " + out) == 0);
        const json j = json::parse(slurp(out));
        CHECK(j.at("phi").size() == 10);
        CHECK(j.at("phi")[0].at("feature") == "PROTOCOL");
        CHECK(j.at("mode") == "kernel");
        // replay reproduces the explanation byte for byte
        const std::string first = slurp(out);
        REQUIRE(run("replay " + out + ".manifest.json") == 0);
        CHECK(slurp(out) == first);
    }

    SUBCASE("gradient-shap on a flow instance") {
        const auto out = dir.file("gs_flow.json");
        REQUIRE(run("explain gradient-shap --checkpoint " + ckpt + " --data " + feats +
                    " --instance-index 3 --samples 10 --seed 5 --output " + out) == 0);
        const json j = json::parse(slurp(out));
        CHECK(j.at("phi").size() == 10);
        CHECK(j.at("mode") == "expected_gradients");
    }

    SUBCASE("explain with out-of-range index exits 3") {
        CHECK(run("explain kernel-shap --checkpoint " + ckpt + " --data " + feats +
                  " --instance-index 100000 --output " + dir.file("nope.json")) == 3);
    }

    SUBCASE("quality build then check; missing file first exits 3") {
        const auto qset = dir.file("quality.json");
        CHECK(run("quality check --checkpoint " + ckpt + " --quality " + qset + " --data " +
                  feats + " --instance-index 0") == 3);
        const auto verdict = dir.file("verdict.json");
        REQUIRE(run("quality build --checkpoint " + ckpt + " --data " + feats +
                    " --per-class 20 --seed 6 --output " + qset) == 0);
        REQUIRE(run("quality check --checkpoint " + ckpt + " --quality " + qset + " --data " +
                    feats + " --instance-index 0 --output " + verdict) == 0);
        const json j = json::parse(slurp(verdict));
        CHECK((j.at("category") == "TP" || j.at("category") == "TN" ||
               j.at("category") == "FP" || j.at("category") == "FN"));

        // a checkpoint with different weights must be rejected as stale
        const auto ckpt2 = dir.file("model2.json");
        REQUIRE(run("train --model cnn-gru --data " + feats + " --output " + ckpt2 +
                    " --clients 2 --rounds 1 --epochs 1 --batch-size 16 --seed 99") == 0);
        CHECK(run("quality check --checkpoint " + ckpt2 + " --quality " + qset + " --data " +
                  feats + " --instance-index 0") == 5);
    }

    SUBCASE("replay reproduces the checkpoint byte for byte") {
        const std::string first = slurp(ckpt);
        REQUIRE(run("replay " + ckpt + ".manifest.json") == 0);
        CHECK(slurp(ckpt) == first);
    }

    SUBCASE("training divergence exits 4") {
        CHECK(run("train --model cnn-gru --data " + feats + " --output " + dir.file("nan.json") +
                  " --clients 1 --rounds 1 --epochs 3 --batch-size 32 --lr 1e300") == 4);
    }

    SUBCASE("config file drives the run; flags override it") {
        const auto cfg_path = dir.file("train.json");
        {
            std::ofstream out(cfg_path);
            out << json{{"model", "cnn-gru"}, {"data", feats},    {"output", ckpt},
                        {"clients", 2},       {"rounds", 2},      {"epochs", 2},
                        {"batch_size", 16},   {"lr", 0.001},      {"seed", 4}}
                       .dump();
        }
        const std::string from_flags = slurp(ckpt);
        REQUIRE(run("train --config " + cfg_path) == 0);
        CHECK(slurp(ckpt) == from_flags);  // same resolved settings, same bytes
        // an explicit flag beats the file
        REQUIRE(run("train --config " + cfg_path + " --seed 5") == 0);
        CHECK(slurp(ckpt) != from_flags);
    }
}

TEST_CASE("graph pipeline: preprocess, train, gradient-shap with DOT, quality") {
    TempDir dir;
    const auto events = dir.file("events.jsonl");
    const auto graph = dir.file("graph.json");
    const auto ckpt = dir.file("egs.json");
    REQUIRE(run("synth provenance --nodes 60 --edges 240 --attack-rate 0.05 --seed 31 --output " +
                events) == 0);
    REQUIRE(run("preprocess provenance --input " + events + " --output " + graph) == 0);
    REQUIRE(run("train --model e-graphsage --data " + graph + " --output " + ckpt +
                " --clients 2 --rounds 1 --epochs 4 --seed 32") == 0);

    // pick a real edge id from the archive
    const json garchive = json::parse(slurp(graph));
    const std::string edge_id = garchive.at("edges")[0].at("id").get<std::string>();

    const auto out = dir.file("explain.json");
    REQUIRE(run("explain gradient-shap --checkpoint " + ckpt + " --graph " + graph +
                " --edge-id " + edge_id + " --hops 1 --samples 8 --seed 33 --output " + out) == 0);
    const json j = json::parse(slurp(out));
    CHECK(j.at("edge_id") == edge_id);
    CHECK(j.contains("center_node"));
    double max_node = 0.0;
    for (const auto& [id, score] : j.at("node_scores").items()) {
        CHECK(score.get<double>() >= 0.0);
        CHECK(score.get<double>() <= 1.0);
        max_node = std::max(max_node, score.get<double>());
    }
    CHECK(max_node == 1.0);
    const auto dot = dir.file("explain.dot");
    CHECK(fs::exists(dot));
    CHECK(slurp(dot).find("digraph") != std::string::npos);

    SUBCASE("unknown edge id exits 3") {
        CHECK(run("explain gradient-shap --checkpoint " + ckpt + " --graph " + graph +
                  " --edge-id ghost-edge --output " + dir.file("x.json")) == 3);
    }

    SUBCASE("quality build/check on the graph detector") {
        const auto qset = dir.file("gq.json");
        REQUIRE(run("quality build --checkpoint " + ckpt + " --graph " + graph +
                    " --per-class 10 --seed 34 --output " + qset) == 0);
        CHECK(run("quality check --checkpoint " + ckpt + " --quality " + qset + " --graph " +
                  graph + " --edge-id " + edge_id) == 0);
    }
}

TEST_CASE("train honors the per-model epoch defaults") {
    TempDir dir;
    const auto events = dir.file("tiny.jsonl");
    const auto graph = dir.file("tiny_graph.json");
    const auto ckpt = dir.file("tiny_egs.json");
    REQUIRE(run("synth provenance --nodes 20 --edges 40 --attack-rate 0.1 --seed 71 --output " +
                events) == 0);
    REQUIRE(run("preprocess provenance --input " + events + " --output " + graph) == 0);
    REQUIRE(run("train --model e-graphsage --data " + graph + " --output " + ckpt +
                " --clients 1 --rounds 1 --seed 72") == 0);
    const json manifest = json::parse(slurp(ckpt + ".manifest.json"));
    CHECK(manifest.at("config").at("epochs") == 100);
    CHECK(manifest.at("config").at("batch_size") == 0);  // full-graph steps
    CHECK(manifest.at("config").at("clients") == 1);
}

TEST_CASE("preprocess netflow reports malformed rows without failing") {
    TempDir dir;
    const auto csv = dir.file("noisy.csv");
    {
        std::ofstream out(csv);
        out << "IPV4_SRC_ADDR,L4_SRC_PORT,IPV4_DST_ADDR,L4_DST_PORT,PROTOCOL,L7_PROTO,IN_BYTES,"
               "OUT_BYTES,IN_PKTS,OUT_PKTS,TCP_FLAGS,FLOW_DURATION_MILLISECONDS,Label\n";
        out << "10.0.0.1,80,10.0.0.2,443,6,7,100,100,1,1,16,50,0\n";
        out << "10.0.0.1,80,10.0.0.2,443,banana,7,100,100,1,1,16,50,0\n";
        out << "10.0.0.1,80,10.0.0.2,443,17,7,100,100,1,1,16,50,1\n";
    }
    const auto feats = dir.file("noisy.json");
    const auto log = dir.file("log.txt");
    CHECK(run("preprocess netflow --input " + csv + " --output " + feats, log) == 0);
    const json j = json::parse(slurp(feats));
    CHECK(j.size() == 2);
    CHECK(slurp(log).find("line 3") != std::string::npos);
    // strict mode aborts instead
    CHECK(run("preprocess netflow --strict --input " + csv + " --output " + feats) == 3);
}
