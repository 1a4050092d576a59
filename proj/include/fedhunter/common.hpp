#ifndef FEDHUNTER_COMMON_HPP
#define FEDHUNTER_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fedhunter {

inline constexpr const char* kToolVersion = "0.1.0";

// Error taxonomy shared by the library and the CLI exit codes:
// usage -> 2, data -> 3, numeric -> 4, staleness -> 5.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StaleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a, the single hash used for token bucketing and
// checkpoint fingerprints.
inline constexpr uint64_t kFnvOffset = 1469598103934665603ULL;
inline constexpr uint64_t kFnvPrime = 1099511628211ULL;

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = kFnvOffset) {
    return fnv1a64(s.data(), s.size(), h);
}

std::string to_hex(uint64_t v);

// Writes content to a temp file and renames it over path.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace fedhunter

#endif
