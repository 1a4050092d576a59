#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <utility>

#include "doctest.h"
#include "fedhunter/common.hpp"
#include "fedhunter/mathfn.hpp"
#include "fedhunter/netflow.hpp"
#include "fedhunter/rng.hpp"
#include "fedhunter/synth.hpp"

using namespace fedhunter;
using namespace fedhunter::netflow;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path, std::ios::trunc);
    out << content;
    return path;
}

constexpr const char* kHeader =
    "IPV4_SRC_ADDR,L4_SRC_PORT,IPV4_DST_ADDR,L4_DST_PORT,PROTOCOL,L7_PROTO,IN_BYTES,"
    "OUT_BYTES,IN_PKTS,OUT_PKTS,TCP_FLAGS,FLOW_DURATION_MILLISECONDS,Label\n";

}  // namespace

TEST_CASE("erf against frozen reference values") {
    // 16-digit values from standard tables
    CHECK(erf_stable(0.5) == doctest::Approx(0.5204998778130465).epsilon(1e-14));
    CHECK(erf_stable(1.0) == doctest::Approx(0.8427007929497149).epsilon(1e-14));
    CHECK(erf_stable(2.0) == doctest::Approx(0.9953222650189527).epsilon(1e-14));
    CHECK(erf_stable(3.0) == doctest::Approx(0.9999779095030014).epsilon(1e-14));
    CHECK(erf_stable(0.0) == 0.0);
}

TEST_CASE("erf tracks the platform libm well inside the 1e-12 budget") {
    for (double x = 0.0; x <= 8.0; x += 0.01) {
        CHECK(std::fabs(erf_stable(x) - std::erf(x)) < 1e-13);
    }
    CHECK(erf_stable(30.0) == 1.0);
    CHECK(erf_stable(-1.0) == doctest::Approx(-0.8427007929497149).epsilon(1e-14));
}

TEST_CASE("normalize_erf is strictly monotone in x") {
    // strict growth until the double result saturates at 1.0
    double prev = -1.0;
    for (int i = 0; i <= 2000; ++i) {
        const double x = i * 3.0;
        const double y = normalize_erf(x, 600.0);
        if (i > 0 && x < 3000.0) {
            CHECK(y > prev);
        }
        CHECK(y >= prev);
        CHECK(y >= 0.0);
        CHECK(y <= 1.0);
        prev = y;
    }
}

TEST_CASE("normalize_minmax bounds and direct evaluation") {
    CHECK(normalize_minmax(0.0, 1) == 0.0);
    CHECK(normalize_minmax(255.0, 1) == 1.0);
    CHECK(normalize_minmax(6.0, 1) == doctest::Approx(6.0 / 255.0).epsilon(1e-15));
    CHECK(normalize_minmax(65535.0, 2) == 1.0);
    CHECK_THROWS_AS(normalize_minmax(256.0, 1, "PROTOCOL"), DataError);
    CHECK_THROWS_AS(normalize_minmax(-1.0, 2), DataError);
    // the error names the offending feature
    try {
        normalize_minmax(999.0, 1, "PROTOCOL");
        FAIL("expected range error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("PROTOCOL") != std::string::npos);
    }
}

TEST_CASE("normalize_erf matches erf(1) at x = k_w for every table coefficient") {
    for (double k_w : {20.0, 900.0, 600.0}) {
        CHECK(normalize_erf(k_w, k_w) == doctest::Approx(0.8427008).epsilon(1e-6));
    }
    CHECK(normalize_erf(0.0, 20.0) == 0.0);
    CHECK_THROWS_AS(normalize_erf(-1.0, 20.0), DataError);
}

TEST_CASE("normalization table matches the published per-feature scheme") {
    const auto& table = normalization_table();
    REQUIRE(table.size() == 12);
    auto find = [&](const std::string& name) -> const NormalizationSpec& {
        for (const auto& s : table) {
            if (s.feature_name == name) return s;
        }
        FAIL("missing feature ", name);
        return table[0];
    };
    CHECK(find("IPV4_SRC_ADDR").method == NormMethod::Drop);
    CHECK(find("IPV4_DST_ADDR").method == NormMethod::Drop);
    CHECK(find("PROTOCOL").method == NormMethod::MinMax);
    CHECK(find("PROTOCOL").feature_size_bytes == 1);
    CHECK(find("L4_SRC_PORT").feature_size_bytes == 2);
    CHECK(find("L4_DST_PORT").method == NormMethod::MinMax);
    CHECK(find("IN_PKTS").k_w == 20.0);
    CHECK(find("OUT_PKTS").k_w == 20.0);
    CHECK(find("IN_BYTES").k_w == 900.0);
    CHECK(find("OUT_BYTES").k_w == 900.0);
    CHECK(find("FLOW_DURATION_MILLISECONDS").k_w == 600.0);
    CHECK(find("TCP_FLAGS").feature_size_bytes == 1);
    CHECK(find("L7_PROTO").method == NormMethod::MinMax);
    CHECK(feature_names().size() == 10);
}

TEST_CASE("ingest: header-only file yields an empty list") {
    const auto path = write_temp("fh_empty.csv", kHeader);
    const auto result = ingest_csv(path);
    CHECK(result.vectors.empty());
    CHECK(result.row_errors.empty());
}

TEST_CASE("ingest: one valid row composes with normalize_minmax") {
    const auto path = write_temp(
        "fh_one.csv", std::string(kHeader) + "10.0.0.1,1234,10.0.0.2,80,6,7,500,600,3,4,24,100,1\n");
    const auto result = ingest_csv(path);
    REQUIRE(result.vectors.size() == 1);
    const auto& v = result.vectors[0];
    CHECK(v.values[0] == doctest::Approx(6.0 / 255.0).epsilon(1e-15));
    CHECK(v.values[1] == doctest::Approx(1234.0 / 65535.0).epsilon(1e-15));
    CHECK(v.values[3] == doctest::Approx(erf_stable(3.0 / 20.0)).epsilon(1e-15));
    CHECK(v.values[5] == doctest::Approx(erf_stable(500.0 / 900.0)).epsilon(1e-15));
    CHECK(v.values[8] == doctest::Approx(erf_stable(100.0 / 600.0)).epsilon(1e-15));
    CHECK(v.label == 1);
}

TEST_CASE("ingest: protocol out of byte range is a row error at line 2") {
    const auto path = write_temp(
        "fh_bad.csv",
        std::string(kHeader) + "10.0.0.1,1,10.0.0.2,2,999,7,1,1,1,1,0,1,0\n" +
            "10.0.0.1,1,10.0.0.2,2,6,7,1,1,1,1,0,1,0\n");
    const auto result = ingest_csv(path);
    CHECK(result.vectors.size() == 1);
    REQUIRE(result.row_errors.size() == 1);
    CHECK(result.row_errors[0].line == 2);
    CHECK(result.row_errors[0].message.find("PROTOCOL") != std::string::npos);

    IngestOptions strict;
    strict.strict = true;
    CHECK_THROWS_AS(ingest_csv(path, strict), DataError);

    // the same row passes with clamping (value pinned to 255)
    IngestOptions clamp;
    clamp.clamp_overflow = true;
    const auto clamped = ingest_csv(path, clamp);
    CHECK(clamped.vectors.size() == 2);
    CHECK(clamped.vectors[0].values[0] == 1.0);
}

TEST_CASE("ingest: missing column is a schema error") {
    const auto path = write_temp("fh_schema.csv", "IPV4_SRC_ADDR,L4_SRC_PORT,Label\n1.2.3.4,1,0\n");
    CHECK_THROWS_AS(ingest_csv(path), DataError);
}

TEST_CASE("ingest fuzz: every component of every vector is in [0,1]") {
    synth::NetflowSynthConfig cfg;
    cfg.n = 10000;
    cfg.seed = 99;
    cfg.separation = 0.5;
    const auto records = synth::synth_netflow(cfg);
    const auto path = (std::filesystem::temp_directory_path() / "fh_fuzz.csv").string();
    synth::write_netflow_csv(records, path);
    const auto result = ingest_csv(path);
    REQUIRE(result.vectors.size() == 10000);
    for (const auto& v : result.vectors) {
        for (double c : v.values) {
            CHECK(c >= 0.0);
            CHECK(c <= 1.0);
        }
        CHECK((v.label == 0 || v.label == 1));
    }
}

TEST_CASE("feature files: ingest -> serialize -> ingest is the identity") {
    synth::NetflowSynthConfig cfg;
    cfg.n = 64;
    cfg.seed = 4;
    const auto records = synth::synth_netflow(cfg);
    std::vector<FeatureVector> vecs;
    for (const auto& r : records) {
        vecs.push_back(normalize_record(r));
    }
    const auto dir = std::filesystem::temp_directory_path();
    for (const char* name : {"fh_rt.json", "fh_rt.bin"}) {
        const std::string path = (dir / name).string();
        save_features(vecs, path);
        const auto loaded = load_features(path);
        REQUIRE(loaded.size() == vecs.size());
        for (size_t i = 0; i < vecs.size(); ++i) {
            CHECK(loaded[i] == vecs[i]);  // bit-exact round trip
        }
    }
}

TEST_CASE("stratified_split proportions, determinism and partition property") {
    std::vector<FeatureVector> data;
    for (int i = 0; i < 10; ++i) {
        FeatureVector v;
        v.label = 1;
        v.values[0] = i * 0.01;
        data.push_back(v);
        v.label = 0;
        v.values[0] = 0.5 + i * 0.01;
        data.push_back(v);
    }
    auto [train, test] = stratified_split(data, 0.7, 42);
    CHECK(train.size() == 14);
    CHECK(test.size() == 6);
    size_t train_attack = 0;
    for (const auto& v : train) {
        train_attack += v.label;
    }
    CHECK(train_attack == 7);

    auto [train2, test2] = stratified_split(data, 0.7, 42);
    CHECK(train == train2);
    CHECK(test == test2);

    // multiset partition: train + test == data
    auto key = [](const FeatureVector& v) { return std::make_pair(v.values[0], v.label); };
    std::vector<std::pair<double, int>> all, combined;
    for (const auto& v : data) all.push_back(key(v));
    for (const auto& v : train) combined.push_back(key(v));
    for (const auto& v : test) combined.push_back(key(v));
    std::sort(all.begin(), all.end());
    std::sort(combined.begin(), combined.end());
    CHECK(all == combined);

    CHECK_THROWS_AS(stratified_split(data, 0.0, 1), UsageError);
    CHECK_THROWS_AS(stratified_split(data, 1.0, 1), UsageError);
}

TEST_CASE("stratified_split: a class with zero samples is absent from both sides") {
    std::vector<FeatureVector> data(9);
    for (size_t i = 0; i < data.size(); ++i) {
        data[i].label = 0;  // no attack samples at all
        data[i].values[0] = 0.1 * static_cast<double>(i);
    }
    auto [train, test] = stratified_split(data, 0.7, 2);
    CHECK(train.size() + test.size() == 9);
    for (const auto& v : train) {
        CHECK(v.label == 0);
    }
    for (const auto& v : test) {
        CHECK(v.label == 0);
    }
}

TEST_CASE("stratified_split preserves a skewed class ratio") {
    // 80.4% attack mix at desk scale
    synth::NetflowSynthConfig cfg;
    cfg.n = 5000;
    cfg.attack_rate = 0.804;
    cfg.seed = 12;
    const auto records = synth::synth_netflow(cfg);
    std::vector<FeatureVector> data;
    for (const auto& r : records) {
        data.push_back(normalize_record(r));
    }
    auto [train, test] = stratified_split(data, 0.7, 5);
    auto rate = [](const std::vector<FeatureVector>& v) {
        size_t a = 0;
        for (const auto& x : v) a += x.label;
        return static_cast<double>(a) / v.size();
    };
    CHECK(rate(train) == doctest::Approx(0.804).epsilon(0.001));
    CHECK(rate(test) == doctest::Approx(0.804).epsilon(0.001));
}
