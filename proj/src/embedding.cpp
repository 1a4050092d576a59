#include "fedhunter/embedding.hpp"

#include <cctype>
#include <cmath>

#include "fedhunter/common.hpp"

namespace fedhunter::prov {

std::vector<double> embed_sentence(const std::string& sentence) {
    std::vector<double> vec(kEmbeddingDim, 0.0);
    bool any_token = false;
    std::string token;
    auto flush = [&] {
        if (token.empty()) {
            return;
        }
        const uint64_t h = fnv1a64(token);
        const size_t bucket = static_cast<size_t>(h % kEmbeddingDim);
        vec[bucket] += (h >> 63) ? -1.0 : 1.0;
        any_token = true;
        token.clear();
    };
    for (char c : sentence) {
        const auto uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) {
            token += static_cast<char>(std::tolower(uc));
        } else {
            flush();
        }
    }
    flush();
    if (!any_token) {
        return vec;
    }
    double norm = 0.0;
    for (double v : vec) {
        norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& v : vec) {
            v /= norm;
        }
    }
    return vec;
}

}  // namespace fedhunter::prov
