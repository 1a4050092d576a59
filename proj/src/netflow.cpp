#include "fedhunter/netflow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "fedhunter/common.hpp"
#include "fedhunter/mathfn.hpp"
#include "fedhunter/rng.hpp"
#include "nlohmann/json.hpp"

namespace fedhunter::netflow {

using nlohmann::json;

const std::array<NormalizationSpec, 12>& normalization_table() {
    static const std::array<NormalizationSpec, 12> table = {{
        {"IPV4_SRC_ADDR", NormMethod::Drop, 4, 0.0},
        {"IPV4_DST_ADDR", NormMethod::Drop, 4, 0.0},
        {"PROTOCOL", NormMethod::MinMax, 1, 0.0},
        {"L4_SRC_PORT", NormMethod::MinMax, 2, 0.0},
        {"L4_DST_PORT", NormMethod::MinMax, 2, 0.0},
        {"IN_PKTS", NormMethod::Erf, 4, 20.0},
        {"OUT_PKTS", NormMethod::Erf, 4, 20.0},
        {"IN_BYTES", NormMethod::Erf, 4, 900.0},
        {"OUT_BYTES", NormMethod::Erf, 4, 900.0},
        {"TCP_FLAGS", NormMethod::MinMax, 1, 0.0},
        {"FLOW_DURATION_MILLISECONDS", NormMethod::Erf, 4, 600.0},
        {"L7_PROTO", NormMethod::MinMax, 2, 0.0},
    }};
    return table;
}

const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "PROTOCOL", "L4_SRC_PORT", "L4_DST_PORT",   "IN_PKTS",
        "OUT_PKTS", "IN_BYTES",    "OUT_BYTES",     "TCP_FLAGS",
        "FLOW_DURATION_MILLISECONDS", "L7_PROTO",
    };
    return names;
}

namespace {

double byte_width_max(int size_bytes) {
    // 256^size - 1, exact in double for sizes 1..4
    return std::ldexp(1.0, 8 * size_bytes) - 1.0;
}

const NormalizationSpec& spec_for(const std::string& feature_name) {
    for (const auto& s : normalization_table()) {
        if (s.feature_name == feature_name) {
            return s;
        }
    }
    throw DataError("unknown feature: " + feature_name);
}

}  // namespace

double normalize_minmax(double x, int feature_size_bytes, const std::string& feature_name) {
    const double x_max = byte_width_max(feature_size_bytes);
    if (x < 0.0 || x > x_max) {
        throw DataError("value " + std::to_string(x) + " out of range [0," +
                        std::to_string(static_cast<uint64_t>(x_max)) + "]" +
                        (feature_name.empty() ? "" : " for feature " + feature_name));
    }
    return x / x_max;
}

double normalize_erf(double x, double k_w, const std::string& feature_name) {
    if (x < 0.0) {
        throw DataError("negative value " + std::to_string(x) +
                        (feature_name.empty() ? "" : " for feature " + feature_name));
    }
    return erf_stable(x / k_w);
}

FeatureVector normalize_record(const RawFlowRecord& rec, bool clamp_overflow) {
    const std::array<uint64_t, kFeatureCount> raw = {
        rec.protocol, rec.l4_src_port, rec.l4_dst_port, rec.in_pkts,  rec.out_pkts,
        rec.in_bytes, rec.out_bytes,   rec.tcp_flags,   rec.flow_duration_ms, rec.l7_proto,
    };
    FeatureVector out;
    out.label = rec.label;
    for (size_t i = 0; i < kFeatureCount; ++i) {
        const auto& spec = spec_for(feature_names()[i]);
        double x = static_cast<double>(raw[i]);
        const double x_max = byte_width_max(spec.feature_size_bytes);
        if (x > x_max) {
            if (!clamp_overflow) {
                throw DataError("value " + std::to_string(raw[i]) + " exceeds " +
                                std::to_string(static_cast<uint64_t>(x_max)) + " for feature " +
                                spec.feature_name);
            }
            x = x_max;
        }
        out.values[i] = spec.method == NormMethod::MinMax
                            ? normalize_minmax(x, spec.feature_size_bytes, spec.feature_name)
                            : normalize_erf(x, spec.k_w, spec.feature_name);
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    size_t e = s.find_last_not_of(" \t");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

uint64_t parse_u64(const std::string& s, const std::string& col) {
    const std::string t = trim(s);
    if (t.empty()) {
        throw DataError("empty value in column " + col);
    }
    // tolerate float-formatted integers like "6.0"
    size_t pos = 0;
    double d;
    try {
        d = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw DataError("unparsable value '" + t + "' in column " + col);
    }
    if (pos != t.size() || d < 0.0 || d != std::floor(d)) {
        throw DataError("unparsable value '" + t + "' in column " + col);
    }
    return static_cast<uint64_t>(d);
}

bool looks_like_ipv4(const std::string& s) {
    int parts = 0;
    size_t i = 0;
    while (i < s.size()) {
        size_t j = i;
        long v = 0;
        while (j < s.size() && s[j] >= '0' && s[j] <= '9') {
            v = v * 10 + (s[j] - '0');
            if (v > 255) return false;
            ++j;
        }
        if (j == i) return false;
        ++parts;
        if (j == s.size()) break;
        if (s[j] != '.') return false;
        i = j + 1;
    }
    return parts == 4;
}

}  // namespace

IngestResult ingest_csv(const std::string& path, const IngestOptions& opts) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open CSV file: " + path);
    }
    std::string header_line;
    if (!std::getline(in, header_line)) {
        throw DataError("empty CSV file (header row required): " + path);
    }
    const std::vector<std::string> header = split_csv_line(header_line);
    std::map<std::string, size_t> col;
    for (size_t i = 0; i < header.size(); ++i) {
        col[trim(header[i])] = i;
    }
    static const std::vector<std::string> required = {
        "IPV4_SRC_ADDR", "L4_SRC_PORT", "IPV4_DST_ADDR", "L4_DST_PORT", "PROTOCOL",
        "L7_PROTO",      "IN_BYTES",    "OUT_BYTES",     "IN_PKTS",     "OUT_PKTS",
        "TCP_FLAGS",     "FLOW_DURATION_MILLISECONDS",   "Label",
    };
    std::string missing;
    for (const auto& name : required) {
        if (!col.count(name)) {
            missing += missing.empty() ? name : ", " + name;
        }
    }
    if (!missing.empty()) {
        throw DataError("CSV schema error, missing columns: " + missing);
    }

    IngestResult result;
    std::string line;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_csv_line(line);
        auto field = [&](const std::string& name) -> const std::string& {
            const size_t idx = col.at(name);
            if (idx >= fields.size()) {
                throw DataError("row too short, missing column " + name);
            }
            return fields[idx];
        };
        try {
            RawFlowRecord rec;
            rec.src_addr = trim(field("IPV4_SRC_ADDR"));
            rec.dst_addr = trim(field("IPV4_DST_ADDR"));
            if (!looks_like_ipv4(rec.src_addr)) {
                throw DataError("invalid IPv4 '" + rec.src_addr + "' in column IPV4_SRC_ADDR");
            }
            if (!looks_like_ipv4(rec.dst_addr)) {
                throw DataError("invalid IPv4 '" + rec.dst_addr + "' in column IPV4_DST_ADDR");
            }
            rec.protocol = parse_u64(field("PROTOCOL"), "PROTOCOL");
            rec.l4_src_port = parse_u64(field("L4_SRC_PORT"), "L4_SRC_PORT");
            rec.l4_dst_port = parse_u64(field("L4_DST_PORT"), "L4_DST_PORT");
            rec.in_pkts = parse_u64(field("IN_PKTS"), "IN_PKTS");
            rec.out_pkts = parse_u64(field("OUT_PKTS"), "OUT_PKTS");
            rec.in_bytes = parse_u64(field("IN_BYTES"), "IN_BYTES");
            rec.out_bytes = parse_u64(field("OUT_BYTES"), "OUT_BYTES");
            rec.tcp_flags = parse_u64(field("TCP_FLAGS"), "TCP_FLAGS");
            rec.flow_duration_ms =
                parse_u64(field("FLOW_DURATION_MILLISECONDS"), "FLOW_DURATION_MILLISECONDS");
            rec.l7_proto = parse_u64(field("L7_PROTO"), "L7_PROTO");
            const uint64_t label = parse_u64(field("Label"), "Label");
            if (label > 1) {
                throw DataError("label must be 0 or 1, got " + std::to_string(label));
            }
            rec.label = static_cast<int>(label);

            FeatureVector fv = normalize_record(rec, opts.clamp_overflow);
            if (opts.drop_ports) {
                fv.values[1] = 0.0;
                fv.values[2] = 0.0;
            }
            result.vectors.push_back(fv);
        } catch (const DataError& e) {
            if (opts.strict) {
                throw DataError("line " + std::to_string(line_no) + ": " + e.what());
            }
            result.row_errors.push_back({line_no, e.what()});
        }
    }
    return result;
}

std::pair<std::vector<FeatureVector>, std::vector<FeatureVector>> stratified_split(
    const std::vector<FeatureVector>& data, double train_fraction, uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw UsageError("train_fraction must be in (0,1)");
    }
    std::array<std::vector<size_t>, 2> per_class;
    for (size_t i = 0; i < data.size(); ++i) {
        per_class[data[i].label == 1 ? 1 : 0].push_back(i);
    }
    Rng rng(seed);
    std::vector<FeatureVector> train, test;
    for (int cls = 0; cls < 2; ++cls) {
        auto& idx = per_class[cls];
        if (idx.empty()) {
            std::cerr << "warning: class " << cls << " has no samples, absent from both splits\n";
            continue;
        }
        rng.shuffle(idx);
        const size_t n_train =
            static_cast<size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
        for (size_t j = 0; j < idx.size(); ++j) {
            (j < n_train ? train : test).push_back(data[idx[j]]);
        }
    }
    return {std::move(train), std::move(test)};
}

void save_features(const std::vector<FeatureVector>& data, const std::string& path) {
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        json arr = json::array();
        for (const auto& fv : data) {
            json values = json::array();
            for (double v : fv.values) {
                values.push_back(v);
            }
            arr.push_back({{"values", values}, {"label", fv.label}});
        }
        atomic_write_file(path, arr.dump(2) + "\n");
        return;
    }
    // flat little-endian float64: 10 values then the label per record
    std::string buf;
    buf.resize(data.size() * 11 * sizeof(double));
    size_t off = 0;
    for (const auto& fv : data) {
        for (double v : fv.values) {
            std::memcpy(buf.data() + off, &v, sizeof(double));
            off += sizeof(double);
        }
        const double label = static_cast<double>(fv.label);
        std::memcpy(buf.data() + off, &label, sizeof(double));
        off += sizeof(double);
    }
    atomic_write_file(path, buf);
}

std::vector<FeatureVector> load_features(const std::string& path) {
    std::vector<FeatureVector> out;
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        json arr;
        try {
            arr = json::parse(read_file(path));
        } catch (const json::exception& e) {
            throw DataError("feature file parse error in " + path + ": " + e.what());
        }
        if (!arr.is_array()) {
            throw DataError("feature file must be a JSON array: " + path);
        }
        for (const auto& item : arr) {
            FeatureVector fv;
            const auto& values = item.at("values");
            if (!values.is_array() || values.size() != kFeatureCount) {
                throw DataError("feature record must have exactly 10 values: " + path);
            }
            for (size_t i = 0; i < kFeatureCount; ++i) {
                fv.values[i] = values[i].get<double>();
            }
            fv.label = item.at("label").get<int>();
            if (fv.label != 0 && fv.label != 1) {
                throw DataError("label must be 0 or 1 in " + path);
            }
            out.push_back(fv);
        }
        return out;
    }
    const std::string buf = read_file(path);
    const size_t rec_bytes = 11 * sizeof(double);
    if (buf.size() % rec_bytes != 0) {
        throw DataError("binary feature file truncated: " + path);
    }
    size_t off = 0;
    while (off < buf.size()) {
        FeatureVector fv;
        for (size_t i = 0; i < kFeatureCount; ++i) {
            std::memcpy(&fv.values[i], buf.data() + off, sizeof(double));
            off += sizeof(double);
        }
        double label;
        std::memcpy(&label, buf.data() + off, sizeof(double));
        off += sizeof(double);
        if (label != 0.0 && label != 1.0) {
            throw DataError("binary feature file has non-binary label: " + path);
        }
        fv.label = static_cast<int>(label);
        out.push_back(fv);
    }
    return out;
}

}  // namespace fedhunter::netflow
