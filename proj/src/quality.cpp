#include "fedhunter/quality.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "fedhunter/common.hpp"
#include "fedhunter/rng.hpp"

namespace fedhunter::quality {

using nlohmann::json;

const char* to_string(Category c) {
    switch (c) {
        case Category::TP: return "TP";
        case Category::TN: return "TN";
        case Category::FP: return "FP";
        case Category::FN: return "FN";
    }
    return "?";
}

Category category_from_string(const std::string& s) {
    if (s == "TP") return Category::TP;
    if (s == "TN") return Category::TN;
    if (s == "FP") return Category::FP;
    if (s == "FN") return Category::FN;
    throw DataError("unknown prediction category: " + s);
}

Category categorize(bool predicted_attack, bool actual_attack) {
    if (predicted_attack) {
        return actual_attack ? Category::TP : Category::FP;
    }
    return actual_attack ? Category::FN : Category::TN;
}

std::array<std::vector<size_t>, 4> split_by_category(const std::vector<int>& predicted,
                                                     const std::vector<int>& labels) {
    if (predicted.size() != labels.size()) {
        throw DataError("split_by_category: predictions and labels differ in length");
    }
    std::array<std::vector<size_t>, 4> subsets;
    for (size_t i = 0; i < predicted.size(); ++i) {
        subsets[static_cast<int>(categorize(predicted[i] == 1, labels[i] == 1))].push_back(i);
    }
    return subsets;
}

bool QualityDataset::empty() const { return nonempty_classes() == 0; }

size_t QualityDataset::nonempty_classes() const {
    size_t n = 0;
    for (const auto& c : classes) {
        if (!c.empty()) {
            ++n;
        }
    }
    return n;
}

QualityDataset build_quality_dataset(
    const std::function<std::vector<double>(size_t)>& penultimate,
    const std::array<std::vector<size_t>, 4>& subsets, size_t per_class_cap, uint64_t seed,
    const std::string& model_fingerprint) {
    if (per_class_cap == 0) {
        throw UsageError("per_class_cap must be >= 1");
    }
    QualityDataset set;
    set.fingerprint = model_fingerprint;
    Rng rng(seed);
    for (int c = 0; c < 4; ++c) {
        std::vector<size_t> idx = subsets[c];
        rng.shuffle(idx);
        const size_t take = std::min(per_class_cap, idx.size());
        for (size_t i = 0; i < take; ++i) {
            std::vector<double> v = penultimate(idx[i]);
            if (set.dim == 0) {
                set.dim = v.size();
            } else if (v.size() != set.dim) {
                throw DataError("penultimate vectors disagree on dimension");
            }
            set.classes[c].push_back(std::move(v));
        }
    }
    if (set.empty()) {
        throw DataError("quality dataset is empty: every category had zero samples");
    }
    return set;
}

json QualityVerdict::to_json() const {
    json dist = json::object();
    for (int c = 0; c < 4; ++c) {
        dist[to_string(static_cast<Category>(c))] = defined[c] ? json(distances[c]) : json();
    }
    return {{"category", to_string(category)}, {"distances", dist}};
}

QualityVerdict check_decision(const std::vector<double>& instance_penultimate,
                              const QualityDataset& set, const std::string& model_fingerprint) {
    if (set.fingerprint != model_fingerprint) {
        throw StaleError("quality dataset fingerprint " + set.fingerprint +
                         " does not match model fingerprint " + model_fingerprint);
    }
    if (set.nonempty_classes() < 2) {
        throw DataError("check_decision needs at least two nonempty categories");
    }
    if (instance_penultimate.size() != set.dim) {
        throw DataError("instance penultimate dimension " +
                        std::to_string(instance_penultimate.size()) + " != dataset dimension " +
                        std::to_string(set.dim));
    }
    QualityVerdict verdict;
    double best = std::numeric_limits<double>::infinity();
    int best_c = -1;
    for (int c = 0; c < 4; ++c) {
        const auto& members = set.classes[c];
        if (members.empty()) {
            verdict.distances[c] = std::numeric_limits<double>::quiet_NaN();
            verdict.defined[c] = false;
            continue;
        }
        double sum = 0.0;
        for (const auto& v : members) {
            double d2 = 0.0;
            for (size_t i = 0; i < set.dim; ++i) {
                const double d = instance_penultimate[i] - v[i];
                d2 += d * d;
            }
            sum += std::sqrt(d2);
        }
        const double avg = sum / static_cast<double>(members.size());
        verdict.distances[c] = avg;
        verdict.defined[c] = true;
        if (avg < best) {  // strict: ties keep the earlier category
            best = avg;
            best_c = c;
        }
    }
    verdict.category = static_cast<Category>(best_c);
    return verdict;
}

void save_quality(const QualityDataset& set, const std::string& path) {
    json classes = json::object();
    for (int c = 0; c < 4; ++c) {
        classes[to_string(static_cast<Category>(c))] = set.classes[c];
    }
    const json root = {{"fingerprint", set.fingerprint}, {"dim", set.dim}, {"classes", classes}};
    atomic_write_file(path, root.dump() + "\n");
}

QualityDataset load_quality(const std::string& path) {
    json root;
    try {
        root = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw DataError("quality dataset parse error in " + path + ": " + e.what());
    }
    QualityDataset set;
    set.fingerprint = root.at("fingerprint").get<std::string>();
    set.dim = root.at("dim").get<size_t>();
    for (int c = 0; c < 4; ++c) {
        const auto& arr = root.at("classes").at(to_string(static_cast<Category>(c)));
        for (const auto& v : arr) {
            std::vector<double> vec = v.get<std::vector<double>>();
            if (vec.size() != set.dim) {
                throw DataError("quality dataset vector dimension mismatch in " + path);
            }
            set.classes[c].push_back(std::move(vec));
        }
    }
    return set;
}

void export_embeddings(const QualityDataset& set, const std::string& path) {
    if (set.empty()) {
        throw DataError("export_embeddings: dataset is empty");
    }
    std::ostringstream out;
    out << "category";
    for (size_t i = 0; i < set.dim; ++i) {
        out << ",v" << i;
    }
    out << "\n";
    char buf[32];
    for (int c = 0; c < 4; ++c) {
        for (const auto& v : set.classes[c]) {
            out << to_string(static_cast<Category>(c));
            for (double x : v) {
                std::snprintf(buf, sizeof(buf), "%.17g", x);
                out << "," << buf;
            }
            out << "\n";
        }
    }
    atomic_write_file(path, out.str());
}

std::vector<std::pair<Category, std::vector<double>>> load_embeddings_csv(
    const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("embeddings CSV is empty: " + path);
    }
    std::vector<std::pair<Category, std::vector<double>>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        std::pair<Category, std::vector<double>> row{category_from_string(cell), {}};
        while (std::getline(ls, cell, ',')) {
            row.second.push_back(std::stod(cell));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace fedhunter::quality
