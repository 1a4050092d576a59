#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "doctest.h"
#include "fedhunter/checkpoint.hpp"
#include "fedhunter/cnn_gru.hpp"
#include "fedhunter/common.hpp"
#include "fedhunter/egraphsage.hpp"
#include "fedhunter/layers.hpp"
#include "fedhunter/optimizer.hpp"
#include "fedhunter/provenance.hpp"
#include "fedhunter/rng.hpp"

using namespace fedhunter;
using namespace fedhunter::nn;

namespace {

// central finite differences, the independent gradient oracle
double fd(const std::function<double()>& f, double* slot, double h = 1e-5) {
    const double orig = *slot;
    *slot = orig + h;
    const double fp = f();
    *slot = orig - h;
    const double fm = f();
    *slot = orig;
    return (fp - fm) / (2.0 * h);
}

bool close_rel(double analytic, double numeric, double tol = 1e-4) {
    const double scale = std::max({1e-6, std::fabs(analytic), std::fabs(numeric)});
    return std::fabs(analytic - numeric) / scale <= tol;
}

std::vector<double> random_vec(size_t n, Rng& rng, double lo = 0.05, double hi = 0.95) {
    std::vector<double> v(n);
    for (double& x : v) {
        x = rng.uniform(lo, hi);
    }
    return v;
}

prov::ProvenanceGraph small_graph(uint64_t seed) {
    // 6 nodes, 8 edges, one self-loop, one isolated node
    prov::ProvenanceGraph g;
    Rng rng(seed);
    for (int i = 0; i < 6; ++i) {
        prov::ProvNode n;
        n.id = "n" + std::to_string(i);
        n.type = prov::NodeType::Subject;
        n.attrs = {{"sub_type", "process"}};
        n.embedding = random_vec(384, rng, -0.2, 0.2);
        g.add_node(n);
    }
    const std::pair<int, int> ends[8] = {{0, 1}, {1, 2}, {2, 0}, {3, 1},
                                         {0, 3}, {2, 3}, {1, 1}, {4, 0}};
    for (int i = 0; i < 8; ++i) {
        prov::ProvEdge e;
        e.id = "e" + std::to_string(i);
        e.type = prov::EdgeType::ModifyProcess;
        e.src = "n" + std::to_string(ends[i].first);
        e.dst = "n" + std::to_string(ends[i].second);
        e.attrs = {{"exec", "imapd"}};
        e.label = i % 3 == 0 ? 1 : 0;
        e.embedding = random_vec(384, rng, -0.2, 0.2);
        g.add_edge(e);
    }
    return g;
}

}  // namespace

TEST_CASE("dense layer: identity weights pass the input through") {
    Rng rng(1);
    Dense d;
    d.init(3, 3, rng);
    std::fill(d.W.begin(), d.W.end(), 0.0);
    for (size_t i = 0; i < 3; ++i) {
        d.W[i * 3 + i] = 1.0;
    }
    std::fill(d.b.begin(), d.b.end(), 0.0);
    const std::vector<double> x = {0.2, -0.4, 0.9};
    CHECK(d.forward(x, 1) == x);
}

TEST_CASE("dense backward: dx = W^T g") {
    Rng rng(2);
    Dense d;
    d.init(4, 2, rng);
    const std::vector<double> x = random_vec(4, rng);
    const std::vector<double> g = {0.7, -0.3};
    const auto dx = d.backward(x, g, 1);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(dx[i] == doctest::Approx(d.W[i] * g[0] + d.W[4 + i] * g[1]).epsilon(1e-12));
    }
}

TEST_CASE("sigmoid and softmax invariants") {
    CHECK(sigmoid(0.0) == 0.5);
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto logits = random_vec(5, rng, -8.0, 8.0);
        const auto p = softmax_rows(logits, 1, 5);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v > 0.0);
            sum += v;
        }
        CHECK(std::fabs(sum - 1.0) < 1e-12);
        const double s = sigmoid(rng.uniform(-30.0, 30.0));
        CHECK(s > 0.0);
        CHECK(s < 1.0);
    }
}

TEST_CASE("conv1d hand oracle: all-ones kernel over an all-ones sequence") {
    Rng rng(4);
    Conv1D conv;
    conv.init(1, 1, rng);
    std::fill(conv.W.begin(), conv.W.end(), 1.0);
    std::fill(conv.b.begin(), conv.b.end(), 0.0);
    const std::vector<double> x(10, 1.0);
    const auto y = conv.forward(x, 1, 10);
    for (size_t t = 0; t < 10; ++t) {
        CHECK(y[t] == doctest::Approx(t == 0 || t == 9 ? 2.0 : 3.0));
    }
}

TEST_CASE("per-layer gradients match central finite differences") {
    Rng rng(5);

    SUBCASE("conv1d") {
        Conv1D conv;
        conv.init(2, 3, rng);
        const size_t B = 2, T = 6;
        std::vector<double> x = random_vec(B * T * 2, rng, -1.0, 1.0);
        const auto c = random_vec(B * T * 3, rng, -1.0, 1.0);
        auto loss = [&] {
            const auto y = conv.forward(x, B, T);
            double s = 0.0;
            for (size_t i = 0; i < y.size(); ++i) s += c[i] * y[i];
            return s;
        };
        conv.zero_grad();
        const auto dx = conv.backward(x, c, B, T);
        for (size_t i = 0; i < x.size(); i += 5) {
            CHECK(close_rel(dx[i], fd(loss, &x[i])));
        }
        for (size_t i = 0; i < conv.W.size(); i += 3) {
            CHECK(close_rel(conv.dW[i], fd(loss, &conv.W[i])));
        }
        CHECK(close_rel(conv.db[1], fd(loss, &conv.b[1])));
    }

    SUBCASE("batchnorm, training statistics") {
        BatchNorm1D bn;
        bn.init(4);
        // non-trivial gamma/beta
        for (size_t i = 0; i < 4; ++i) {
            bn.gamma[i] = 0.5 + 0.3 * i;
            bn.beta[i] = -0.2 + 0.1 * i;
        }
        const size_t B = 3, T = 5;
        std::vector<double> x = random_vec(B * T * 4, rng, -2.0, 2.0);
        const auto c = random_vec(B * T * 4, rng, -1.0, 1.0);
        BatchNorm1D::Cache cache;
        auto loss = [&] {
            const auto y = bn.forward(x, B, T, true, nullptr);
            double s = 0.0;
            for (size_t i = 0; i < y.size(); ++i) s += c[i] * y[i];
            return s;
        };
        bn.forward(x, B, T, true, &cache);
        bn.zero_grad();
        const auto dx = bn.backward(cache, c);
        for (size_t i = 0; i < x.size(); i += 7) {
            CHECK(close_rel(dx[i], fd(loss, &x[i])));
        }
        for (size_t i = 0; i < 4; ++i) {
            CHECK(close_rel(bn.dgamma[i], fd(loss, &bn.gamma[i])));
            CHECK(close_rel(bn.dbeta[i], fd(loss, &bn.beta[i])));
        }
    }

    SUBCASE("batchnorm, inference affine") {
        BatchNorm1D bn;
        bn.init(3);
        bn.running_mean = {0.1, -0.2, 0.4};
        bn.running_var = {0.9, 1.5, 0.3};
        const size_t B = 2, T = 4;
        std::vector<double> x = random_vec(B * T * 3, rng, -2.0, 2.0);
        const auto c = random_vec(B * T * 3, rng, -1.0, 1.0);
        BatchNorm1D::Cache cache;
        auto loss = [&] {
            const auto y = bn.forward(x, B, T, false, nullptr);
            double s = 0.0;
            for (size_t i = 0; i < y.size(); ++i) s += c[i] * y[i];
            return s;
        };
        bn.forward(x, B, T, false, &cache);
        bn.zero_grad();
        const auto dx = bn.backward(cache, c);
        for (size_t i = 0; i < x.size(); i += 3) {
            CHECK(close_rel(dx[i], fd(loss, &x[i])));
        }
        // two inference passes are bit-identical (frozen affine map)
        CHECK(bn.forward(x, B, T, false, nullptr) == bn.forward(x, B, T, false, nullptr));
    }

    SUBCASE("maxpool") {
        const size_t B = 2, T = 7, C = 3;
        std::vector<double> x = random_vec(B * T * C, rng, -1.0, 1.0);
        const auto c = random_vec(B * T * C, rng, -1.0, 1.0);
        MaxPool1D::Cache cache;
        auto loss = [&] {
            const auto y = MaxPool1D::forward(x, B, T, C, nullptr);
            double s = 0.0;
            for (size_t i = 0; i < y.size(); ++i) s += c[i] * y[i];
            return s;
        };
        MaxPool1D::forward(x, B, T, C, &cache);
        const auto dx = MaxPool1D::backward(cache, c);
        for (size_t i = 0; i < x.size(); ++i) {
            CHECK(close_rel(dx[i], fd(loss, &x[i])));
        }
    }

    SUBCASE("gru") {
        Gru gru;
        gru.init(2, 3, rng);
        const size_t B = 2, T = 5;
        std::vector<double> x = random_vec(B * T * 2, rng, -1.0, 1.0);
        const auto c = random_vec(B * 3, rng, -1.0, 1.0);
        auto loss = [&] {
            const auto h = gru.forward(x, B, T, nullptr);
            double s = 0.0;
            for (size_t i = 0; i < h.size(); ++i) s += c[i] * h[i];
            return s;
        };
        Gru::Cache cache;
        gru.forward(x, B, T, &cache);
        gru.zero_grad();
        const auto dx = gru.backward(cache, c);
        for (size_t i = 0; i < x.size(); i += 2) {
            CHECK(close_rel(dx[i], fd(loss, &x[i])));
        }
        std::vector<std::pair<std::vector<double>*, std::vector<double>*>> mats = {
            {&gru.Wz, &gru.dWz}, {&gru.Wr, &gru.dWr}, {&gru.Wh, &gru.dWh},
            {&gru.Uz, &gru.dUz}, {&gru.Ur, &gru.dUr}, {&gru.Uh, &gru.dUh},
            {&gru.bz, &gru.dbz}, {&gru.br, &gru.dbr}, {&gru.bh, &gru.dbh},
        };
        for (auto& [w, dw] : mats) {
            for (size_t i = 0; i < w->size(); i += 2) {
                CHECK(close_rel((*dw)[i], fd(loss, &(*w)[i])));
            }
        }
    }
}

TEST_CASE("full cnn_gru gradients match finite differences (training mode)") {
    detect::CnnGruModel model(11);
    Rng rng(12);
    const size_t B = 3;
    std::vector<double> x = random_vec(B * 10, rng, 0.05, 0.95);
    const std::vector<double> y = {1.0, 0.0, 1.0};

    auto loss = [&] {
        const auto p = model.forward(x, B, true, nullptr);
        double s = 0.0;
        for (size_t i = 0; i < B; ++i) {
            const double pi = std::clamp(p[i], 1e-12, 1.0 - 1e-12);
            s += -(y[i] * std::log(pi) + (1.0 - y[i]) * std::log(1.0 - pi));
        }
        return s / B;
    };
    detect::CnnGruModel::Cache cache;
    const auto p = model.forward(x, B, true, &cache);
    std::vector<double> dlogit(B);
    for (size_t i = 0; i < B; ++i) {
        dlogit[i] = (p[i] - y[i]) / B;
    }
    model.zero_grad();
    const auto dx = model.backward_from_logit(cache, dlogit);

    // input gradient
    for (size_t i = 0; i < x.size(); i += 3) {
        CHECK(close_rel(dx[i], fd(loss, &x[i])));
    }
    // a spread of parameter coordinates in every tensor
    for (auto& ref : model.parameters()) {
        const size_t n = ref.value->size();
        for (size_t i = 0; i < n; i += std::max<size_t>(1, n / 5)) {
            const double analytic = (*ref.grad)[i];
            const double numeric = fd(loss, &(*ref.value)[i]);
            INFO(ref.name, "[", i, "] analytic=", analytic, " numeric=", numeric);
            CHECK(close_rel(analytic, numeric));
        }
    }
}

TEST_CASE("e_graphsage gradients match finite differences") {
    const auto g = small_graph(31);
    detect::EGraphSageModel model(32);
    Rng rng(33);

    // class-weighted CE over all edges, inference mode (no dropout)
    auto loss_for = [&](detect::EGraphSageModel& m, const std::vector<double>* nf,
                        const std::vector<double>* ef) {
        const auto probs = m.forward(g, false, nullptr, nullptr, nf, ef);
        double s = 0.0;
        for (size_t e = 0; e < g.edge_count(); ++e) {
            const int yy = g.edges()[e].label;
            s += -std::log(std::clamp(probs[e * 2 + yy], 1e-12, 1.0));
        }
        return s / static_cast<double>(g.edge_count());
    };

    detect::EGraphSageModel::Cache cache;
    const auto probs = model.forward(g, false, nullptr, &cache);
    std::vector<double> dlogits(g.edge_count() * 2);
    const double inv_n = 1.0 / static_cast<double>(g.edge_count());
    for (size_t e = 0; e < g.edge_count(); ++e) {
        const int yy = g.edges()[e].label;
        for (int k = 0; k < 2; ++k) {
            dlogits[e * 2 + k] = inv_n * (probs[e * 2 + k] - (k == yy ? 1.0 : 0.0));
        }
    }
    model.zero_grad();
    const auto input_grads = model.backward(cache, dlogits);

    SUBCASE("parameter gradients") {
        auto loss = [&] { return loss_for(model, nullptr, nullptr); };
        for (auto& ref : model.parameters()) {
            const size_t n = ref.value->size();
            for (size_t i = 0; i < n; i += std::max<size_t>(1, n / 4)) {
                const double analytic = (*ref.grad)[i];
                const double numeric = fd(loss, &(*ref.value)[i]);
                INFO(ref.name, "[", i, "]");
                CHECK(close_rel(analytic, numeric));
            }
        }
    }

    SUBCASE("input gradients (node and edge features)") {
        std::vector<double> nf = cache.node_feats;
        std::vector<double> ef = cache.edge_feats;
        auto loss = [&] { return loss_for(model, &nf, &ef); };
        for (size_t i = 0; i < nf.size(); i += 257) {
            CHECK(close_rel(input_grads.node_feats[i], fd(loss, &nf[i])));
        }
        for (size_t i = 0; i < ef.size(); i += 311) {
            CHECK(close_rel(input_grads.edge_feats[i], fd(loss, &ef[i])));
        }
    }

    SUBCASE("training mode with a fixed dropout mask") {
        auto loss = [&] {
            Rng dropout_rng(77);
            detect::EGraphSageModel::Cache c2;
            const auto p = model.forward(g, true, &dropout_rng, &c2);
            double s = 0.0;
            for (size_t e = 0; e < g.edge_count(); ++e) {
                const int yy = g.edges()[e].label;
                s += -std::log(std::clamp(p[e * 2 + yy], 1e-12, 1.0));
            }
            return s / static_cast<double>(g.edge_count());
        };
        Rng dropout_rng(77);
        detect::EGraphSageModel::Cache c2;
        const auto p2 = model.forward(g, true, &dropout_rng, &c2);
        std::vector<double> dl(g.edge_count() * 2);
        for (size_t e = 0; e < g.edge_count(); ++e) {
            const int yy = g.edges()[e].label;
            for (int k = 0; k < 2; ++k) {
                dl[e * 2 + k] = inv_n * (p2[e * 2 + k] - (k == yy ? 1.0 : 0.0));
            }
        }
        model.zero_grad();
        model.backward(c2, dl);
        for (auto& ref : model.parameters()) {
            const size_t n = ref.value->size();
            for (size_t i = 0; i < n; i += std::max<size_t>(1, n / 3)) {
                CHECK(close_rel((*ref.grad)[i], fd(loss, &(*ref.value)[i])));
            }
        }
    }
}

TEST_CASE("adam: quadratic oracle, zero gradients and NaN rejection") {
    SUBCASE("minimizes (x-3)^2") {
        std::vector<double> x = {0.0};
        std::vector<double> dx = {0.0};
        std::vector<ParamRef> params = {{"x", {1}, &x, &dx}};
        AdamState state;
        for (int step = 0; step < 500; ++step) {
            dx[0] = 2.0 * (x[0] - 3.0);
            adam_step(params, state, 0.1);
        }
        CHECK(std::fabs(x[0] - 3.0) < 1e-2);
    }

    SUBCASE("zero gradient from a fresh state leaves parameters unchanged") {
        std::vector<double> x = {1.5};
        std::vector<double> dx = {0.0};
        std::vector<ParamRef> params = {{"x", {1}, &x, &dx}};
        AdamState state;
        adam_step(params, state, 0.1);
        CHECK(x[0] == 1.5);  // zero moments, zero update

        // once moments exist, a zero-grad step just decays them
        dx[0] = 1.0;
        adam_step(params, state, 0.0);
        const double m_before = state.m["x"][0];
        const double v_before = state.v["x"][0];
        dx[0] = 0.0;
        adam_step(params, state, 0.0);
        CHECK(state.m["x"][0] == doctest::Approx(0.9 * m_before));
        CHECK(state.v["x"][0] == doctest::Approx(0.999 * v_before));
    }

    SUBCASE("lr=0 never changes parameters") {
        std::vector<double> x = {1.5};
        std::vector<double> dx = {2.0};
        std::vector<ParamRef> params = {{"x", {1}, &x, &dx}};
        AdamState state;
        for (int i = 0; i < 10; ++i) {
            adam_step(params, state, 0.0);
        }
        CHECK(x[0] == 1.5);
    }

    SUBCASE("NaN gradient fails fast") {
        std::vector<double> x = {1.0};
        std::vector<double> dx = {std::nan("")};
        std::vector<ParamRef> params = {{"x", {1}, &x, &dx}};
        AdamState state;
        CHECK_THROWS_AS(adam_step(params, state, 0.1), NumericError);
    }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    detect::CnnGruModel model(21);
    const auto ckpt = model.to_checkpoint();
    const auto path = (std::filesystem::temp_directory_path() / "fh_ckpt.json").string();
    save_checkpoint(ckpt, path);
    const auto loaded = load_checkpoint(path);
    auto restored = detect::CnnGruModel::from_checkpoint(loaded);

    Rng rng(22);
    std::vector<double> x = random_vec(10, rng);
    CHECK(model.forward(x, 1, false, nullptr) == restored.forward(x, 1, false, nullptr));
    CHECK(model.fingerprint() == restored.fingerprint());
}

TEST_CASE("checkpoint error paths") {
    const auto dir = std::filesystem::temp_directory_path();
    SUBCASE("truncated file") {
        const auto path = (dir / "fh_trunc.json").string();
        std::ofstream(path) << "{\"format_version\":1,\"model_kind\":\"cnn_gru\",\"lay";
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
    }
    SUBCASE("wrong model kind") {
        detect::CnnGruModel model(3);
        const auto ckpt = model.to_checkpoint();
        CHECK_THROWS_AS(detect::EGraphSageModel::from_checkpoint(ckpt), DataError);
    }
    SUBCASE("unsupported version") {
        const auto path = (dir / "fh_ver.json").string();
        std::ofstream(path) << R"({"format_version":2,"model_kind":"cnn_gru","layers":[]})";
        CHECK_THROWS_AS(load_checkpoint(path), DataError);
    }
}

TEST_CASE("constant model has zero input gradient") {
    detect::CnnGruModel model(71);
    // zero every trainable weight: the output collapses to sigmoid(bias)
    for (auto& ref : model.parameters()) {
        std::fill(ref.value->begin(), ref.value->end(), 0.0);
    }
    Rng rng(72);
    std::array<double, 10> x{};
    for (double& v : x) {
        v = rng.uniform();
    }
    CHECK(model.predict_one(x) == 0.5);
    const auto g = model.input_gradient(x);
    for (double v : g) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("dropout is the identity in inference mode") {
    const auto g = small_graph(41);
    detect::EGraphSageModel model(42);
    const auto a = model.forward(g, false, nullptr, nullptr);
    const auto b = model.forward(g, false, nullptr, nullptr);
    CHECK(a == b);
    // training mode with dropout produces a different (masked) result
    Rng dr(1);
    const auto c = model.forward(g, true, &dr, nullptr);
    CHECK(a != c);
}
