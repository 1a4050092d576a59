// fedhunter: federated intrusion-detection pipeline driver.
// Subcommands: preprocess, train, explain, quality, synth, replay.
// Exit codes: 0 ok, 2 usage, 3 data, 4 numeric, 5 stale artifact.

#include <chrono>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedhunter/common.hpp"
#include "fedhunter/federated.hpp"
#include "fedhunter/gradient_shap.hpp"
#include "fedhunter/manifest.hpp"
#include "fedhunter/quality.hpp"
#include "fedhunter/rng.hpp"
#include "fedhunter/shap.hpp"
#include "fedhunter/synth.hpp"

namespace {

using fedhunter::DataError;
using fedhunter::UsageError;
using nlohmann::json;
namespace fh = fedhunter;

class Stopwatch {
   public:
    long elapsed_ms() const {
        const auto now = std::chrono::steady_clock::now();
        return static_cast<long>(
            std::chrono::duration_cast<std::chrono::milliseconds>(now - start_).count());
    }

   private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void finish(const std::string& command, const json& cfg, uint64_t seed,
            std::vector<std::string> inputs, std::vector<std::string> outputs,
            const Stopwatch& watch) {
    fh::cli::RunManifest m;
    m.command = command;
    m.config = cfg;
    m.seed = seed;
    m.inputs = std::move(inputs);
    m.outputs = std::move(outputs);
    m.tool_version = fh::kToolVersion;
    m.duration_ms = watch.elapsed_ms();
    fh::cli::write_manifests(m);
}

std::string dot_path_for(const std::string& output) {
    if (output.size() >= 5 && output.substr(output.size() - 5) == ".json") {
        return output.substr(0, output.size() - 5) + ".dot";
    }
    return output + ".dot";
}

// seeded background subsample used by the explainers
std::vector<std::vector<double>> background_from(const std::vector<fh::netflow::FeatureVector>& data,
                                                 size_t count, uint64_t seed) {
    std::vector<size_t> idx(data.size());
    for (size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    fh::Rng rng(seed);
    rng.shuffle(idx);
    const size_t take = std::min(count, data.size());
    std::vector<std::vector<double>> bg;
    bg.reserve(take);
    for (size_t i = 0; i < take; ++i) {
        bg.emplace_back(data[idx[i]].values.begin(), data[idx[i]].values.end());
    }
    return bg;
}

// ------------------------------------------------------------------ runners

void run_preprocess_netflow(const json& cfg) {
    Stopwatch watch;
    const std::string input = cfg.at("input").get<std::string>();
    const std::string output = cfg.at("output").get<std::string>();
    fh::netflow::IngestOptions opts;
    opts.strict = cfg.value("strict", false);
    opts.clamp_overflow = cfg.value("clamp", false);
    opts.drop_ports = cfg.value("drop_ports", false);
    const auto result = fh::netflow::ingest_csv(input, opts);
    for (const auto& err : result.row_errors) {
        std::cerr << "row error at line " << err.line << ": " << err.message << "\n";
    }
    fh::netflow::save_features(result.vectors, output);
    std::cout << "wrote " << result.vectors.size() << " feature vectors to " << output << " ("
              << result.row_errors.size() << " rows skipped)\n";
    finish("preprocess netflow", cfg, 0, {input}, {output}, watch);
}

void run_preprocess_provenance(const json& cfg) {
    Stopwatch watch;
    const std::string input = cfg.at("input").get<std::string>();
    const std::string output = cfg.at("output").get<std::string>();
    fh::prov::BuildReport report;
    const auto graph = fh::prov::build_graph(input, &report);
    fh::prov::save_graph(graph, output);
    std::cout << "wrote graph archive with " << report.nodes << " nodes and " << report.edges
              << " edges to " << output << "\n";
    finish("preprocess provenance", cfg, 0, {input}, {output}, watch);
}

void run_train(const json& cfg) {
    Stopwatch watch;
    const std::string model = cfg.at("model").get<std::string>();
    const std::string data_path = cfg.at("data").get<std::string>();
    const std::string output = cfg.at("output").get<std::string>();
    const std::string roundlog = cfg.at("roundlog").get<std::string>();

    fh::fed::FederatedConfig fc;
    fc.num_clients = cfg.at("clients").get<size_t>();
    fc.rounds = cfg.at("rounds").get<size_t>();
    fc.epochs = cfg.at("epochs").get<size_t>();
    fc.batch_size = cfg.at("batch_size").get<size_t>();
    fc.lr = cfg.at("lr").get<double>();
    fc.seed = cfg.at("seed").get<uint64_t>();
    fc.threshold = cfg.at("threshold").get<double>();
    const double fraction = cfg.at("train_fraction").get<double>();

    fh::fed::FederatedResult result;
    if (model == "cnn-gru") {
        const auto data = fh::netflow::load_features(data_path);
        auto [train, test] = fh::netflow::stratified_split(data, fraction, fc.seed);
        result = fh::fed::run_federated_cnn_gru(fc, train, test);
    } else if (model == "e-graphsage") {
        const auto graph = fh::prov::load_graph(data_path);
        std::vector<int> labels(graph.edge_count());
        for (size_t i = 0; i < labels.size(); ++i) {
            labels[i] = graph.edges()[i].label;
        }
        auto [train_idx, test_idx] = fh::fed::stratified_split_indices(labels, fraction, fc.seed);
        result = fh::fed::run_federated_egs(fc, graph, train_idx, test_idx);
    } else {
        throw UsageError("unknown model '" + model + "' (expected cnn-gru or e-graphsage)");
    }

    fh::nn::save_checkpoint(result.checkpoint, output);
    std::string lines;
    for (const auto& log : result.rounds) {
        lines += log.to_json().dump() + "\n";
    }
    fh::atomic_write_file(roundlog, lines);
    const auto& last = result.rounds.back().report;
    std::cout << "final round: accuracy=" << last.accuracy
              << " f1=" << (last.f1_defined ? std::to_string(last.f1) : "undefined") << "\n";
    finish("train", cfg, fc.seed, {data_path}, {output, roundlog}, watch);
}

void run_explain_kernel(const json& cfg) {
    Stopwatch watch;
    const std::string ckpt_path = cfg.at("checkpoint").get<std::string>();
    const std::string data_path = cfg.at("data").get<std::string>();
    const std::string output = cfg.at("output").get<std::string>();
    const size_t index = cfg.at("instance_index").get<size_t>();
    const size_t background_n = cfg.at("background").get<size_t>();
    const size_t budget = cfg.at("budget").get<size_t>();
    const uint64_t seed = cfg.at("seed").get<uint64_t>();

    const auto model = fh::detect::CnnGruModel::from_checkpoint(fh::nn::load_checkpoint(ckpt_path));
    const auto data = fh::netflow::load_features(data_path);
    if (index >= data.size()) {
        throw DataError("instance index " + std::to_string(index) + " out of range (have " +
                        std::to_string(data.size()) + " instances)");
    }
    fh::shap::MaskingConfig masking{background_from(data, background_n, seed)};
    const std::vector<double> x(data[index].values.begin(), data[index].values.end());
    fh::shap::Predictor f = [&model](const std::vector<double>& v) {
        std::array<double, 10> arr{};
        std::copy(v.begin(), v.end(), arr.begin());
        return model.predict_one(arr);
    };
    auto ex = fh::shap::kernel_shap(f, x, masking, budget, seed);
    ex.feature_names.assign(fh::netflow::feature_names().begin(),
                            fh::netflow::feature_names().end());
    json out = ex.to_json();
    out["instance_index"] = index;
    out["label"] = data[index].label;
    fh::atomic_write_file(output, out.dump(2) + "\n");
    std::cout << "kernel-shap: f_x=" << ex.f_x << " phi0=" << ex.phi0 << " -> " << output << "\n";
    finish("explain kernel-shap", cfg, seed, {ckpt_path, data_path}, {output}, watch);
}

void run_explain_gradient(const json& cfg) {
    Stopwatch watch;
    const std::string ckpt_path = cfg.at("checkpoint").get<std::string>();
    const std::string output = cfg.at("output").get<std::string>();
    const uint64_t seed = cfg.at("seed").get<uint64_t>();

    fh::shap::GradientShapConfig gcfg;
    gcfg.n_samples = cfg.at("samples").get<size_t>();
    gcfg.seed = seed;
    const std::string mode = cfg.at("mode").get<std::string>();
    if (mode == "expected-gradients") {
        gcfg.mode = fh::shap::GradientShapConfig::Mode::ExpectedGradients;
    } else if (mode == "paper-literal") {
        gcfg.mode = fh::shap::GradientShapConfig::Mode::PaperLiteral;
    } else {
        throw UsageError("unknown mode '" + mode + "'");
    }

    const auto ckpt = fh::nn::load_checkpoint(ckpt_path);
    if (cfg.contains("edge_id")) {
        const std::string graph_path = cfg.at("graph").get<std::string>();
        const std::string edge_id = cfg.at("edge_id").get<std::string>();
        const int hops = cfg.at("hops").get<int>();
        const auto model = fh::detect::EGraphSageModel::from_checkpoint(ckpt);
        const auto graph = fh::prov::load_graph(graph_path);
        const auto ex = fh::shap::explain_edge(model, graph, edge_id, hops, gcfg);
        const std::string dot_path = dot_path_for(output);
        fh::atomic_write_file(output, ex.to_json().dump(2) + "\n");
        fh::atomic_write_file(dot_path, ex.to_dot());
        std::cout << "gradient-shap: edge " << edge_id << " predicted class "
                  << ex.predicted_class << ", center node " << ex.center_node << " -> " << output
                  << "\n";
        finish("explain gradient-shap", cfg, seed, {ckpt_path, graph_path}, {output, dot_path},
               watch);
        return;
    }

    const std::string data_path = cfg.at("data").get<std::string>();
    const size_t index = cfg.at("instance_index").get<size_t>();
    const size_t background_n = cfg.at("background").get<size_t>();
    const auto model = fh::detect::CnnGruModel::from_checkpoint(ckpt);
    const auto data = fh::netflow::load_features(data_path);
    if (index >= data.size()) {
        throw DataError("instance index " + std::to_string(index) + " out of range (have " +
                        std::to_string(data.size()) + " instances)");
    }
    const auto bg = background_from(data, background_n, seed);
    gcfg.baseline.assign(10, 0.0);
    for (const auto& b : bg) {
        for (size_t i = 0; i < 10; ++i) {
            gcfg.baseline[i] += b[i];
        }
    }
    for (double& v : gcfg.baseline) {
        v /= static_cast<double>(bg.size());
    }
    fh::shap::ValueGradFn f = [&model](const std::vector<double>& v) {
        std::array<double, 10> arr{};
        std::copy(v.begin(), v.end(), arr.begin());
        const double p = model.predict_one(arr);
        const auto g = model.input_gradient(arr);
        return std::make_pair(p, std::vector<double>(g.begin(), g.end()));
    };
    const std::vector<double> x(data[index].values.begin(), data[index].values.end());
    auto ex = fh::shap::gradient_shap(f, x, gcfg);
    ex.feature_names.assign(fh::netflow::feature_names().begin(),
                            fh::netflow::feature_names().end());
    json out = ex.to_json();
    out["instance_index"] = index;
    out["label"] = data[index].label;
    fh::atomic_write_file(output, out.dump(2) + "\n");
    std::cout << "gradient-shap: f_x=" << ex.f_x << " phi0=" << ex.phi0 << " -> " << output
              << "\n";
    finish("explain gradient-shap", cfg, seed, {ckpt_path, data_path}, {output}, watch);
}

void run_quality_build(const json& cfg) {
    Stopwatch watch;
    const std::string ckpt_path = cfg.at("checkpoint").get<std::string>();
    const std::string output = cfg.at("output").get<std::string>();
    const size_t per_class = cfg.at("per_class").get<size_t>();
    const uint64_t seed = cfg.at("seed").get<uint64_t>();
    const double threshold = cfg.at("threshold").get<double>();

    const auto ckpt = fh::nn::load_checkpoint(ckpt_path);
    fh::quality::QualityDataset set;
    std::vector<std::string> inputs = {ckpt_path};
    if (ckpt.model_kind == "cnn_gru") {
        const std::string data_path = cfg.at("data").get<std::string>();
        inputs.push_back(data_path);
        const auto model = fh::detect::CnnGruModel::from_checkpoint(ckpt);
        const auto data = fh::netflow::load_features(data_path);
        const auto probs = model.predict(data);
        std::vector<int> predicted(data.size()), labels(data.size());
        for (size_t i = 0; i < data.size(); ++i) {
            predicted[i] = probs[i] > threshold ? 1 : 0;
            labels[i] = data[i].label;
        }
        const auto subsets = fh::quality::split_by_category(predicted, labels);
        set = fh::quality::build_quality_dataset(
            [&](size_t i) { return model.penultimate(data[i].values); }, subsets, per_class, seed,
            model.fingerprint());
    } else {
        const std::string graph_path = cfg.at("graph").get<std::string>();
        inputs.push_back(graph_path);
        const auto model = fh::detect::EGraphSageModel::from_checkpoint(ckpt);
        const auto graph = fh::prov::load_graph(graph_path);
        const auto probs = model.forward(graph, false, nullptr, nullptr);
        std::vector<int> predicted(graph.edge_count()), labels(graph.edge_count());
        for (size_t i = 0; i < graph.edge_count(); ++i) {
            predicted[i] = probs[i * 2 + 1] > threshold ? 1 : 0;
            labels[i] = graph.edges()[i].label;
        }
        const auto subsets = fh::quality::split_by_category(predicted, labels);
        const auto embeddings = model.embed_nodes(graph);
        set = fh::quality::build_quality_dataset(
            [&](size_t i) { return model.penultimate_edge(graph, embeddings, i); }, subsets,
            per_class, seed, model.fingerprint());
    }
    for (int c = 0; c < 4; ++c) {
        if (set.classes[c].empty()) {
            std::cerr << "warning: category " << fh::quality::to_string(
                             static_cast<fh::quality::Category>(c))
                      << " has no samples\n";
        }
    }
    fh::quality::save_quality(set, output);
    std::vector<std::string> outputs = {output};
    if (cfg.contains("export_csv")) {
        const std::string csv = cfg.at("export_csv").get<std::string>();
        fh::quality::export_embeddings(set, csv);
        outputs.push_back(csv);
    }
    std::cout << "quality dataset: dim=" << set.dim << " sizes TP/TN/FP/FN = "
              << set.classes[0].size() << "/" << set.classes[1].size() << "/"
              << set.classes[2].size() << "/" << set.classes[3].size() << " -> " << output << "\n";
    finish("quality build", cfg, seed, inputs, outputs, watch);
}

void run_quality_check(const json& cfg) {
    Stopwatch watch;
    const std::string ckpt_path = cfg.at("checkpoint").get<std::string>();
    const std::string quality_path = cfg.at("quality").get<std::string>();
    const auto ckpt = fh::nn::load_checkpoint(ckpt_path);
    const auto set = fh::quality::load_quality(quality_path);

    std::vector<double> pen;
    std::string fingerprint;
    std::vector<std::string> inputs = {ckpt_path, quality_path};
    if (ckpt.model_kind == "cnn_gru") {
        const std::string data_path = cfg.at("data").get<std::string>();
        inputs.push_back(data_path);
        const size_t index = cfg.at("instance_index").get<size_t>();
        const auto model = fh::detect::CnnGruModel::from_checkpoint(ckpt);
        const auto data = fh::netflow::load_features(data_path);
        if (index >= data.size()) {
            throw DataError("instance index " + std::to_string(index) + " out of range");
        }
        pen = model.penultimate(data[index].values);
        fingerprint = model.fingerprint();
    } else {
        const std::string graph_path = cfg.at("graph").get<std::string>();
        inputs.push_back(graph_path);
        const std::string edge_id = cfg.at("edge_id").get<std::string>();
        const auto model = fh::detect::EGraphSageModel::from_checkpoint(ckpt);
        const auto graph = fh::prov::load_graph(graph_path);
        const auto embeddings = model.embed_nodes(graph);
        pen = model.penultimate_edge(graph, embeddings, graph.edge_index(edge_id));
        fingerprint = model.fingerprint();
    }
    const auto verdict = fh::quality::check_decision(pen, set, fingerprint);
    std::cout << "verdict: " << fh::quality::to_string(verdict.category) << "\n";
    for (int c = 0; c < 4; ++c) {
        std::cout << "  avg distance " << fh::quality::to_string(static_cast<fh::quality::Category>(c))
                  << ": ";
        if (verdict.defined[c]) {
            std::cout << verdict.distances[c] << "\n";
        } else {
            std::cout << "(empty category)\n";
        }
    }
    if (cfg.contains("output")) {
        const std::string output = cfg.at("output").get<std::string>();
        fh::atomic_write_file(output, verdict.to_json().dump(2) + "\n");
        finish("quality check", cfg, 0, inputs, {output}, watch);
    }
}

void run_synth_netflow(const json& cfg) {
    Stopwatch watch;
    const std::string output = cfg.at("output").get<std::string>();
    fh::synth::NetflowSynthConfig sc;
    sc.n = cfg.at("n").get<size_t>();
    sc.separation = cfg.at("separation").get<double>();
    sc.attack_rate = cfg.at("attack_rate").get<double>();
    sc.seed = cfg.at("seed").get<uint64_t>();
    const auto records = fh::synth::synth_netflow(sc);
    fh::synth::write_netflow_csv(records, output);
    std::cout << "wrote " << records.size() << " synthetic flows to " << output << "\n";
    finish("synth netflow", cfg, sc.seed, {}, {output}, watch);
}

void run_synth_provenance(const json& cfg) {
    Stopwatch watch;
    const std::string output = cfg.at("output").get<std::string>();
    fh::synth::ProvenanceSynthConfig sc;
    sc.nodes = cfg.at("nodes").get<size_t>();
    sc.edges = cfg.at("edges").get<size_t>();
    sc.attack_rate = cfg.at("attack_rate").get<double>();
    sc.seed = cfg.at("seed").get<uint64_t>();
    const auto lines = fh::synth::synth_provenance_jsonl(sc);
    std::string body;
    for (const auto& line : lines) {
        body += line + "\n";
    }
    fh::atomic_write_file(output, body);
    std::cout << "wrote " << sc.nodes << " nodes and " << sc.edges << " events to " << output
              << "\n";
    finish("synth provenance", cfg, sc.seed, {}, {output}, watch);
}

void dispatch(const std::string& command, const json& cfg) {
    if (command == "preprocess netflow") return run_preprocess_netflow(cfg);
    if (command == "preprocess provenance") return run_preprocess_provenance(cfg);
    if (command == "train") return run_train(cfg);
    if (command == "explain kernel-shap") return run_explain_kernel(cfg);
    if (command == "explain gradient-shap") return run_explain_gradient(cfg);
    if (command == "quality build") return run_quality_build(cfg);
    if (command == "quality check") return run_quality_check(cfg);
    if (command == "synth netflow") return run_synth_netflow(cfg);
    if (command == "synth provenance") return run_synth_provenance(cfg);
    throw DataError("manifest names unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated intrusion detection with explainable predictions"};
    app.require_subcommand(1);

    // preprocess
    auto* preprocess = app.add_subcommand("preprocess", "normalize raw inputs into artifacts");
    preprocess->require_subcommand(1);
    {
        auto* nf = preprocess->add_subcommand("netflow", "CSV flows -> feature file");
        auto input = std::make_shared<std::string>();
        auto output = std::make_shared<std::string>();
        auto strict = std::make_shared<bool>(false);
        auto clamp = std::make_shared<bool>(false);
        auto drop_ports = std::make_shared<bool>(false);
        nf->add_option("--input", *input, "NetFlow CSV")->required();
        nf->add_option("--output", *output, "feature file (.json or binary)")->required();
        nf->add_flag("--strict", *strict, "abort on the first malformed row");
        nf->add_flag("--clamp", *clamp, "clamp out-of-range values instead of rejecting rows");
        nf->add_flag("--drop-ports", *drop_ports, "zero the port features");
        nf->callback([=] {
            run_preprocess_netflow({{"input", *input},
                                    {"output", *output},
                                    {"strict", *strict},
                                    {"clamp", *clamp},
                                    {"drop_ports", *drop_ports}});
        });

        auto* pv = preprocess->add_subcommand("provenance", "JSONL events -> graph archive");
        auto pinput = std::make_shared<std::string>();
        auto poutput = std::make_shared<std::string>();
        pv->add_option("--input", *pinput, "JSONL event stream")->required();
        pv->add_option("--output", *poutput, "graph archive (.json)")->required();
        pv->callback([=] {
            run_preprocess_provenance({{"input", *pinput}, {"output", *poutput}});
        });
    }

    // train
    {
        auto* train = app.add_subcommand("train", "federated training run");
        auto config_path = std::make_shared<std::string>();
        auto model = std::make_shared<std::string>();
        auto data = std::make_shared<std::string>();
        auto output = std::make_shared<std::string>();
        auto roundlog = std::make_shared<std::string>();
        auto clients = std::make_shared<long>(10);
        auto rounds = std::make_shared<long>(20);
        auto epochs = std::make_shared<long>(-1);
        auto batch = std::make_shared<long>(-1);
        auto lr = std::make_shared<double>(0.001);
        auto seed = std::make_shared<uint64_t>(0);
        auto fraction = std::make_shared<double>(0.7);
        auto threshold = std::make_shared<double>(0.5);
        train->add_option("--config", *config_path,
                          "JSON config {clients, rounds, epochs, batch_size, lr, seed, model, "
                          "data, output}; explicit flags override");
        train->add_option("--model", *model, "cnn-gru | e-graphsage");
        train->add_option("--data", *data, "feature file or graph archive");
        train->add_option("--output", *output, "checkpoint path");
        train->add_option("--roundlog", *roundlog, "round log JSONL (default <output>.rounds.jsonl)");
        train->add_option("--clients", *clients, "number of federated clients");
        train->add_option("--rounds", *rounds, "number of federated rounds");
        train->add_option("--epochs", *epochs, "local epochs (default 25 cnn-gru, 100 e-graphsage)");
        train->add_option("--batch-size", *batch,
                          "mini-batch size (default 512 cnn-gru, full batch e-graphsage)");
        train->add_option("--lr", *lr, "Adam learning rate");
        train->add_option("--seed", *seed, "run seed");
        train->add_option("--train-fraction", *fraction, "stratified train share");
        train->add_option("--threshold", *threshold, "detection threshold");
        train->callback([=] {
            json cfg = json::object();
            if (!config_path->empty()) {
                try {
                    cfg = json::parse(fh::read_file(*config_path));
                } catch (const json::exception& e) {
                    throw fh::DataError("config parse error in " + *config_path + ": " + e.what());
                }
            }
            auto put = [&](const char* key, const json& value, bool given) {
                if (given || !cfg.contains(key)) {
                    cfg[key] = value;
                }
            };
            put("model", *model, train->count("--model") > 0);
            put("data", *data, train->count("--data") > 0);
            put("output", *output, train->count("--output") > 0);
            put("clients", *clients, train->count("--clients") > 0);
            put("rounds", *rounds, train->count("--rounds") > 0);
            put("lr", *lr, train->count("--lr") > 0);
            put("seed", *seed, train->count("--seed") > 0);
            put("train_fraction", *fraction, train->count("--train-fraction") > 0);
            put("threshold", *threshold, train->count("--threshold") > 0);
            const std::string m = cfg.value("model", "");
            if (m != "cnn-gru" && m != "e-graphsage") {
                throw UsageError("unknown model '" + m + "' (expected cnn-gru or e-graphsage)");
            }
            if (cfg.value("data", "").empty() || cfg.value("output", "").empty()) {
                throw UsageError("train needs --data and --output (flags or config file)");
            }
            if (train->count("--epochs") > 0) {
                cfg["epochs"] = *epochs;
            } else if (!cfg.contains("epochs")) {
                cfg["epochs"] = m == "cnn-gru" ? 25 : 100;
            }
            if (train->count("--batch-size") > 0) {
                cfg["batch_size"] = *batch;
            } else if (!cfg.contains("batch_size")) {
                cfg["batch_size"] = m == "cnn-gru" ? 512 : 0;
            }
            if (train->count("--roundlog") > 0) {
                cfg["roundlog"] = *roundlog;
            } else if (!cfg.contains("roundlog")) {
                cfg["roundlog"] = cfg.at("output").get<std::string>() + ".rounds.jsonl";
            }
            run_train(cfg);
        });
    }

    // explain
    {
        auto* explain = app.add_subcommand("explain", "attribute a prediction to its inputs");
        explain->require_subcommand(1);

        auto* ks = explain->add_subcommand("kernel-shap", "coalition regression over one flow");
        auto ckpt = std::make_shared<std::string>();
        auto data = std::make_shared<std::string>();
        auto output = std::make_shared<std::string>();
        auto index = std::make_shared<long>(0);
        auto background = std::make_shared<long>(100);
        auto budget = std::make_shared<long>(2048);
        auto seed = std::make_shared<uint64_t>(0);
        ks->add_option("--checkpoint", *ckpt)->required();
        ks->add_option("--data", *data, "feature file")->required();
        ks->add_option("--output", *output)->required();
        ks->add_option("--instance-index", *index)->required();
        ks->add_option("--background", *background, "background sample count");
        ks->add_option("--budget", *budget, "coalition budget before sampling kicks in");
        ks->add_option("--seed", *seed);
        ks->callback([=] {
            run_explain_kernel({{"checkpoint", *ckpt},
                                {"data", *data},
                                {"output", *output},
                                {"instance_index", *index},
                                {"background", *background},
                                {"budget", *budget},
                                {"seed", *seed}});
        });

        auto* gs = explain->add_subcommand("gradient-shap", "expected gradients attribution");
        auto gckpt = std::make_shared<std::string>();
        auto graph = std::make_shared<std::string>();
        auto gdata = std::make_shared<std::string>();
        auto edge_id = std::make_shared<std::string>();
        auto gindex = std::make_shared<long>(-1);
        auto goutput = std::make_shared<std::string>();
        auto hops = std::make_shared<int>(1);
        auto samples = std::make_shared<long>(50);
        auto gmode = std::make_shared<std::string>("expected-gradients");
        auto gseed = std::make_shared<uint64_t>(0);
        auto gbackground = std::make_shared<long>(100);
        gs->add_option("--checkpoint", *gckpt)->required();
        gs->add_option("--graph", *graph, "graph archive (edge explanations)");
        gs->add_option("--data", *gdata, "feature file (flow explanations)");
        gs->add_option("--edge-id", *edge_id, "edge to explain");
        gs->add_option("--instance-index", *gindex, "flow instance to explain");
        gs->add_option("--output", *goutput)->required();
        gs->add_option("--hops", *hops, "sub-graph hop count");
        gs->add_option("--samples", *samples, "interpolation sample count");
        gs->add_option("--mode", *gmode, "expected-gradients | paper-literal");
        gs->add_option("--background", *gbackground, "background count for the flow baseline");
        gs->add_option("--seed", *gseed);
        gs->callback([=] {
            json cfg = {{"checkpoint", *gckpt}, {"output", *goutput},  {"hops", *hops},
                        {"samples", *samples},  {"mode", *gmode},      {"seed", *gseed},
                        {"background", *gbackground}};
            if (!edge_id->empty()) {
                if (graph->empty()) {
                    throw UsageError("--edge-id requires --graph");
                }
                cfg["graph"] = *graph;
                cfg["edge_id"] = *edge_id;
            } else if (*gindex >= 0) {
                if (gdata->empty()) {
                    throw UsageError("--instance-index requires --data");
                }
                cfg["data"] = *gdata;
                cfg["instance_index"] = *gindex;
            } else {
                throw UsageError("gradient-shap needs --edge-id or --instance-index");
            }
            run_explain_gradient(cfg);
        });
    }

    // quality
    {
        auto* quality = app.add_subcommand("quality", "decision-quality checking");
        quality->require_subcommand(1);

        auto* build = quality->add_subcommand("build", "penultimate dataset from predictions");
        auto ckpt = std::make_shared<std::string>();
        auto data = std::make_shared<std::string>();
        auto graph = std::make_shared<std::string>();
        auto output = std::make_shared<std::string>();
        auto per_class = std::make_shared<long>(100);
        auto seed = std::make_shared<uint64_t>(0);
        auto threshold = std::make_shared<double>(0.5);
        auto export_csv = std::make_shared<std::string>();
        build->add_option("--checkpoint", *ckpt)->required();
        build->add_option("--data", *data, "feature file (cnn_gru checkpoints)");
        build->add_option("--graph", *graph, "graph archive (e_graphsage checkpoints)");
        build->add_option("--output", *output)->required();
        build->add_option("--per-class", *per_class, "cap per category");
        build->add_option("--seed", *seed);
        build->add_option("--threshold", *threshold);
        build->add_option("--export-csv", *export_csv, "also export embeddings CSV");
        build->callback([=] {
            json cfg = {{"checkpoint", *ckpt}, {"output", *output},     {"per_class", *per_class},
                        {"seed", *seed},       {"threshold", *threshold}};
            if (!data->empty()) cfg["data"] = *data;
            if (!graph->empty()) cfg["graph"] = *graph;
            if (!export_csv->empty()) cfg["export_csv"] = *export_csv;
            run_quality_build(cfg);
        });

        auto* check = quality->add_subcommand("check", "verdict for one prediction");
        auto cckpt = std::make_shared<std::string>();
        auto cquality = std::make_shared<std::string>();
        auto cdata = std::make_shared<std::string>();
        auto cgraph = std::make_shared<std::string>();
        auto cindex = std::make_shared<long>(-1);
        auto cedge = std::make_shared<std::string>();
        auto coutput = std::make_shared<std::string>();
        check->add_option("--checkpoint", *cckpt)->required();
        check->add_option("--quality", *cquality, "quality dataset JSON")->required();
        check->add_option("--data", *cdata);
        check->add_option("--graph", *cgraph);
        check->add_option("--instance-index", *cindex);
        check->add_option("--edge-id", *cedge);
        check->add_option("--output", *coutput, "also write the verdict JSON");
        check->callback([=] {
            json cfg = {{"checkpoint", *cckpt}, {"quality", *cquality}};
            if (!cdata->empty()) cfg["data"] = *cdata;
            if (!cgraph->empty()) cfg["graph"] = *cgraph;
            if (*cindex >= 0) cfg["instance_index"] = *cindex;
            if (!cedge->empty()) cfg["edge_id"] = *cedge;
            if (!coutput->empty()) cfg["output"] = *coutput;
            run_quality_check(cfg);
        });
    }

    // synth
    {
        auto* synth = app.add_subcommand("synth", "synthetic dataset generators");
        synth->require_subcommand(1);

        auto* nf = synth->add_subcommand("netflow", "separable synthetic flows");
        auto n = std::make_shared<long>(1000);
        auto separation = std::make_shared<double>(1.0);
        auto rate = std::make_shared<double>(0.5);
        auto seed = std::make_shared<uint64_t>(0);
        auto output = std::make_shared<std::string>();
        nf->add_option("--n", *n, "record count");
        nf->add_option("--separation", *separation, "class separation in [0,1]");
        nf->add_option("--attack-rate", *rate);
        nf->add_option("--seed", *seed);
        nf->add_option("--output", *output)->required();
        nf->callback([=] {
            run_synth_netflow({{"n", *n},
                               {"separation", *separation},
                               {"attack_rate", *rate},
                               {"seed", *seed},
                               {"output", *output}});
        });

        auto* pv = synth->add_subcommand("provenance", "synthetic provenance events");
        auto nodes = std::make_shared<long>(500);
        auto edges = std::make_shared<long>(2000);
        auto prate = std::make_shared<double>(0.007);
        auto pseed = std::make_shared<uint64_t>(0);
        auto poutput = std::make_shared<std::string>();
        pv->add_option("--nodes", *nodes);
        pv->add_option("--edges", *edges);
        pv->add_option("--attack-rate", *prate);
        pv->add_option("--seed", *pseed);
        pv->add_option("--output", *poutput)->required();
        pv->callback([=] {
            run_synth_provenance({{"nodes", *nodes},
                                  {"edges", *edges},
                                  {"attack_rate", *prate},
                                  {"seed", *pseed},
                                  {"output", *poutput}});
        });
    }

    // replay
    {
        auto* replay = app.add_subcommand("replay", "rerun a command from its manifest");
        auto manifest_path = std::make_shared<std::string>();
        replay->add_option("manifest", *manifest_path, "path to a .manifest.json")->required();
        replay->callback([=] {
            const auto m = fh::cli::load_manifest(*manifest_path);
            dispatch(m.command, m.config);
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const fh::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const fh::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const fh::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const fh::StaleError& e) {
        std::cerr << "stale artifact: " << e.what() << "\n";
        return 5;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
