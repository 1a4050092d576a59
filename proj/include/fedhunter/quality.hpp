#ifndef FEDHUNTER_QUALITY_HPP
#define FEDHUNTER_QUALITY_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

namespace fedhunter::quality {

// (prediction, truth): (1,1) TP, (0,0) TN, (1,0) FP, (0,1) FN. The enum
// order is also the tie-break order for verdicts.
enum class Category : int { TP = 0, TN = 1, FP = 2, FN = 3 };

const char* to_string(Category c);
Category category_from_string(const std::string& s);
Category categorize(bool predicted_attack, bool actual_attack);

// Routes every sample index into exactly one category.
std::array<std::vector<size_t>, 4> split_by_category(const std::vector<int>& predicted,
                                                     const std::vector<int>& labels);

struct QualityDataset {
    std::string fingerprint;  // weights fingerprint of the generating model
    size_t dim = 0;
    std::array<std::vector<std::vector<double>>, 4> classes;

    bool empty() const;
    size_t nonempty_classes() const;
};

// Per category: up to per_class_cap samples (seeded subsample) mapped
// through penultimate(sample_index). Empty categories stay empty.
QualityDataset build_quality_dataset(
    const std::function<std::vector<double>(size_t)>& penultimate,
    const std::array<std::vector<size_t>, 4>& subsets, size_t per_class_cap, uint64_t seed,
    const std::string& model_fingerprint);

struct QualityVerdict {
    Category category = Category::TP;
    std::array<double, 4> distances{};  // average Euclidean distance per category
    std::array<bool, 4> defined{};      // false for empty categories

    nlohmann::json to_json() const;
};

// Average-distance classifier over the penultimate space. Requires a
// fingerprint match (stale sets are rejected) and at least two nonempty
// categories; ties break in TP > TN > FP > FN order.
QualityVerdict check_decision(const std::vector<double>& instance_penultimate,
                              const QualityDataset& set, const std::string& model_fingerprint);

void save_quality(const QualityDataset& set, const std::string& path);
QualityDataset load_quality(const std::string& path);

// CSV of (category, vector components); header names the dim columns.
void export_embeddings(const QualityDataset& set, const std::string& path);
std::vector<std::pair<Category, std::vector<double>>> load_embeddings_csv(const std::string& path);

}  // namespace fedhunter::quality

#endif
