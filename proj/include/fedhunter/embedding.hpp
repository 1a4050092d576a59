#ifndef FEDHUNTER_EMBEDDING_HPP
#define FEDHUNTER_EMBEDDING_HPP

#include <string>
#include <vector>

namespace fedhunter::prov {

constexpr size_t kEmbeddingDim = 384;

// Deterministic sentence embedding by signed feature hashing: lowercase,
// split on non-alphanumeric, FNV-1a each token, bucket by hash mod 384
// with the hash's top bit choosing the sign, then L2-normalize. The empty
// token set maps to the zero vector.
std::vector<double> embed_sentence(const std::string& sentence);

}  // namespace fedhunter::prov

#endif
