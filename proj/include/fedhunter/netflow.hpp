#ifndef FEDHUNTER_NETFLOW_HPP
#define FEDHUNTER_NETFLOW_HPP

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fedhunter::netflow {

// One raw NetFlow v1 record as exported in NF-ToN-IoT style CSVs.
struct RawFlowRecord {
    std::string src_addr;
    std::string dst_addr;
    uint64_t protocol = 0;
    uint64_t l4_src_port = 0;
    uint64_t l4_dst_port = 0;
    uint64_t in_pkts = 0;
    uint64_t out_pkts = 0;
    uint64_t in_bytes = 0;
    uint64_t out_bytes = 0;
    uint64_t tcp_flags = 0;
    uint64_t flow_duration_ms = 0;
    uint64_t l7_proto = 0;
    int label = 0;  // 0 benign, 1 attack
};

enum class NormMethod { MinMax, Erf, Drop };

struct NormalizationSpec {
    std::string feature_name;
    NormMethod method = NormMethod::MinMax;
    int feature_size_bytes = 0;
    double k_w = 0.0;  // only meaningful for Erf
};

// The built-in per-feature scaling table: 12 features, IP addresses
// dropped, packet counts at k_w=20, byte counts at 900, duration at 600.
const std::array<NormalizationSpec, 12>& normalization_table();

// Fixed component order of the produced vectors.
constexpr size_t kFeatureCount = 10;
const std::array<std::string, kFeatureCount>& feature_names();

struct FeatureVector {
    std::array<double, kFeatureCount> values{};
    int label = 0;

    bool operator==(const FeatureVector&) const = default;
};

// (x - 0) / (256^size_bytes - 1). Throws DataError when x is outside the
// declared byte-width range; feature_name is used in the message.
double normalize_minmax(double x, int feature_size_bytes, const std::string& feature_name = "");

// erf(x / k_w); x must be non-negative.
double normalize_erf(double x, double k_w, const std::string& feature_name = "");

// Normalizes one record into the fixed 10-component layout.
// clamp_overflow: values beyond the byte-width bound are clamped to the
// max instead of rejected.
FeatureVector normalize_record(const RawFlowRecord& rec, bool clamp_overflow = false);

struct RowError {
    size_t line = 0;  // 1-based, header is line 1
    std::string message;
};

struct IngestResult {
    std::vector<FeatureVector> vectors;
    std::vector<RowError> row_errors;
    size_t clamped_values = 0;
};

struct IngestOptions {
    bool strict = false;          // first bad row aborts with DataError
    bool clamp_overflow = false;  // clamp out-of-range values instead of rejecting the row
    bool drop_ports = false;      // zero out both port features (analysis aid)
};

// Parses a NF-ToN-IoT style CSV. The header must contain all 12 feature
// columns plus Label; extra columns are ignored. Malformed rows are
// collected (with their line numbers) unless opts.strict.
IngestResult ingest_csv(const std::string& path, const IngestOptions& opts = {});

// Per-class split preserving the class ratio to within one sample.
// Classes with zero samples are simply absent from both sides.
std::pair<std::vector<FeatureVector>, std::vector<FeatureVector>> stratified_split(
    const std::vector<FeatureVector>& data, double train_fraction, uint64_t seed);

// Portable feature files. *.json holds an array of {"values":[...],
// "label":0|1}; any other extension is the flat little-endian binary
// layout of 11 float64 per record (10 values then the label).
void save_features(const std::vector<FeatureVector>& data, const std::string& path);
std::vector<FeatureVector> load_features(const std::string& path);

}  // namespace fedhunter::netflow

#endif
