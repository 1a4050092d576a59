#include "fedhunter/common.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fedhunter {

std::string to_hex(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

void atomic_write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("cannot open for writing: " + tmp);
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw DataError("write failed: " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw DataError("rename failed for " + path + ": " + ec.message());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open file: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace fedhunter
