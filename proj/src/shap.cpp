#include "fedhunter/shap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "fedhunter/common.hpp"
#include "fedhunter/parallel.hpp"
#include "fedhunter/rng.hpp"

namespace fedhunter::shap {

using nlohmann::json;

json ShapExplanation::to_json() const {
    json phis = json::array();
    for (size_t i = 0; i < phi.size(); ++i) {
        const std::string name =
            i < feature_names.size() ? feature_names[i] : "f" + std::to_string(i);
        phis.push_back({{"feature", name}, {"value", phi[i]}});
    }
    return {{"phi0", phi0},     {"phi", phis}, {"f_x", f_x},
            {"mode", mode},     {"seed", seed}, {"ridge_fallback", ridge_fallback}};
}

namespace {

double binom(size_t n, size_t k) {
    if (k > n) {
        return 0.0;
    }
    k = std::min(k, n - k);
    double r = 1.0;
    for (size_t i = 1; i <= k; ++i) {
        r *= static_cast<double>(n - i + 1) / static_cast<double>(i);
    }
    return r;
}

void check_masking(const std::vector<double>& x, const MaskingConfig& masking) {
    if (masking.background.empty()) {
        throw DataError("masking needs a nonempty background dataset");
    }
    for (const auto& b : masking.background) {
        if (b.size() != x.size()) {
            throw DataError("background sample dimension " + std::to_string(b.size()) +
                            " != instance dimension " + std::to_string(x.size()));
        }
    }
}

// nu(mask) = mean over background of f(x with absent features imputed)
double coalition_value(const Predictor& f, const std::vector<double>& x,
                       const MaskingConfig& masking, uint32_t mask) {
    double sum = 0.0;
    std::vector<double> probe(x.size());
    for (const auto& b : masking.background) {
        for (size_t i = 0; i < x.size(); ++i) {
            probe[i] = (mask >> i) & 1u ? x[i] : b[i];
        }
        sum += f(probe);
    }
    return sum / static_cast<double>(masking.background.size());
}

}  // namespace

double shapley_kernel_weight(size_t m, size_t subset_size) {
    if (subset_size == 0 || subset_size >= m) {
        throw UsageError("Shapley kernel weight is defined for interior subset sizes only");
    }
    return static_cast<double>(m - 1) /
           (binom(m, subset_size) * static_cast<double>(subset_size) *
            static_cast<double>(m - subset_size));
}

ShapExplanation shapley_exact(const Predictor& f, const std::vector<double>& x,
                              const MaskingConfig& masking) {
    check_masking(x, masking);
    const size_t m = x.size();
    if (m > 20) {
        throw UsageError("shapley_exact enumerates 2^M coalitions and is capped at M=20 (got M=" +
                         std::to_string(m) + "); use kernel_shap instead");
    }
    const size_t n_masks = size_t{1} << m;
    std::vector<double> nu(n_masks);
    parallel_for(n_masks, [&](size_t mask) {
        nu[mask] = coalition_value(f, x, masking, static_cast<uint32_t>(mask));
    });

    // weight by coalition size: |z|! (M-|z|-1)! / M! == 1 / (M * C(M-1,|z|))
    std::vector<double> weight(m);
    for (size_t s = 0; s < m; ++s) {
        weight[s] = 1.0 / (static_cast<double>(m) * binom(m - 1, s));
    }

    ShapExplanation ex;
    ex.mode = "exact";
    ex.phi0 = nu[0];
    ex.f_x = f(x);
    ex.phi.assign(m, 0.0);
    for (size_t i = 0; i < m; ++i) {
        const uint32_t bit = 1u << i;
        double phi = 0.0;
        for (uint32_t mask = 0; mask < n_masks; ++mask) {
            if (mask & bit) {
                continue;
            }
            phi += weight[std::popcount(mask)] * (nu[mask | bit] - nu[mask]);
        }
        ex.phi[i] = phi;
    }
    return ex;
}

namespace {

struct WeightedCoalition {
    uint32_t mask;
    double weight;
};

// Gaussian elimination with partial pivoting; returns false when a pivot
// collapses (caller retries with a ridge term).
bool solve_linear(std::vector<double> a, std::vector<double> b, size_t n,
                  std::vector<double>& out) {
    for (size_t col = 0; col < n; ++col) {
        size_t pivot = col;
        for (size_t row = col + 1; row < n; ++row) {
            if (std::fabs(a[row * n + col]) > std::fabs(a[pivot * n + col])) {
                pivot = row;
            }
        }
        if (std::fabs(a[pivot * n + col]) < 1e-12) {
            return false;
        }
        if (pivot != col) {
            for (size_t j = 0; j < n; ++j) {
                std::swap(a[col * n + j], a[pivot * n + j]);
            }
            std::swap(b[col], b[pivot]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (size_t row = col + 1; row < n; ++row) {
            const double factor = a[row * n + col] * inv;
            if (factor == 0.0) {
                continue;
            }
            for (size_t j = col; j < n; ++j) {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    out.assign(n, 0.0);
    for (size_t row = n; row-- > 0;) {
        double acc = b[row];
        for (size_t j = row + 1; j < n; ++j) {
            acc -= a[row * n + j] * out[j];
        }
        out[row] = acc / a[row * n + row];
    }
    return true;
}

// kernel-proportional stratified coalition selection for budgets below
// full enumeration
std::vector<WeightedCoalition> sample_coalitions(size_t m, size_t budget, uint64_t seed) {
    std::vector<WeightedCoalition> picked;
    Rng rng(seed);
    // total kernel mass of one size stratum: C(M,s) * kernel(s)
    auto stratum_mass = [&](size_t s) {
        return static_cast<double>(m - 1) / (static_cast<double>(s) * static_cast<double>(m - s));
    };
    std::vector<size_t> open_sizes;
    size_t remaining = budget;
    // enumerate paired sizes (s, M-s) outwards-in while they fit
    for (size_t s = 1; s <= m / 2 && remaining > 0; ++s) {
        const size_t other = m - s;
        const bool paired = other != s;
        double count_d = binom(m, s) + (paired ? binom(m, other) : 0.0);
        if (count_d <= static_cast<double>(remaining)) {
            for (size_t size : paired ? std::vector<size_t>{s, other} : std::vector<size_t>{s}) {
                const double w = shapley_kernel_weight(m, size);
                // enumerate all masks of this size
                uint32_t mask = (1u << size) - 1u;
                const uint32_t limit = 1u << m;
                while (mask < limit) {
                    picked.push_back({mask, w});
                    // next mask with the same popcount
                    const uint32_t c = mask & (~mask + 1u);
                    const uint32_t r = mask + c;
                    mask = (((r ^ mask) >> 2) / c) | r;
                    if (mask >= limit) {
                        break;
                    }
                }
            }
            remaining -= static_cast<size_t>(count_d);
        } else {
            open_sizes.push_back(s);
            if (paired) {
                open_sizes.push_back(other);
            }
        }
    }
    if (open_sizes.empty() || remaining == 0) {
        return picked;
    }
    // allocate the leftover budget across open sizes by kernel mass
    double total_mass = 0.0;
    for (size_t s : open_sizes) {
        total_mass += stratum_mass(s);
    }
    std::set<uint32_t> seen;
    std::vector<size_t> alloc(open_sizes.size(), 0);
    size_t allocated = 0;
    for (size_t i = 0; i < open_sizes.size(); ++i) {
        alloc[i] = static_cast<size_t>(
            std::floor(static_cast<double>(remaining) * stratum_mass(open_sizes[i]) / total_mass));
        allocated += alloc[i];
    }
    for (size_t i = 0; allocated < remaining; i = (i + 1) % open_sizes.size()) {
        ++alloc[i];
        ++allocated;
    }
    for (size_t i = 0; i < open_sizes.size(); ++i) {
        const size_t s = open_sizes[i];
        if (alloc[i] == 0) {
            continue;
        }
        const double per_sample_weight = stratum_mass(s) / static_cast<double>(alloc[i]);
        size_t drawn = 0;
        size_t attempts = 0;
        while (drawn < alloc[i] && attempts < alloc[i] * 64) {
            ++attempts;
            // random mask with popcount s
            uint32_t mask = 0;
            size_t bits = 0;
            while (bits < s) {
                const uint32_t b = 1u << rng.uniform_int(m);
                if (!(mask & b)) {
                    mask |= b;
                    ++bits;
                }
            }
            if (seen.insert(mask).second) {
                picked.push_back({mask, per_sample_weight});
                ++drawn;
            }
        }
    }
    return picked;
}

}  // namespace

ShapExplanation kernel_shap(const Predictor& f, const std::vector<double>& x,
                            const MaskingConfig& masking, size_t coalition_budget, uint64_t seed) {
    check_masking(x, masking);
    const size_t m = x.size();
    if (m > 30) {
        throw UsageError("kernel_shap mask representation is capped at M=30");
    }

    ShapExplanation ex;
    ex.seed = seed;
    ex.phi0 = coalition_value(f, x, masking, 0);
    ex.f_x = f(x);
    ex.phi.assign(m, 0.0);
    if (m == 1) {
        ex.mode = "kernel";
        ex.phi[0] = ex.f_x - ex.phi0;
        return ex;
    }

    const size_t interior = (size_t{1} << m) - 2;
    std::vector<WeightedCoalition> coalitions;
    if (interior <= coalition_budget) {
        ex.mode = "kernel";
        coalitions.reserve(interior);
        for (uint32_t mask = 1; mask < (1u << m) - 1u; ++mask) {
            coalitions.push_back({mask, shapley_kernel_weight(m, std::popcount(mask))});
        }
    } else {
        ex.mode = "kernel_sampled";
        coalitions = sample_coalitions(m, coalition_budget, seed);
    }

    std::vector<double> values(coalitions.size());
    parallel_for(coalitions.size(), [&](size_t i) {
        values[i] = coalition_value(f, x, masking, coalitions[i].mask);
    });

    // hard constraints: g(empty) = phi0, g(full) = f(x); the last feature
    // is eliminated, so the fit runs over a_j = z_j - z_last
    const size_t dim = m - 1;
    std::vector<double> h(dim * dim, 0.0);
    std::vector<double> r(dim, 0.0);
    std::vector<double> a(dim);
    const double span = ex.f_x - ex.phi0;
    for (size_t ci = 0; ci < coalitions.size(); ++ci) {
        const uint32_t mask = coalitions[ci].mask;
        const double w = coalitions[ci].weight;
        const double z_last = (mask >> (m - 1)) & 1u ? 1.0 : 0.0;
        for (size_t j = 0; j < dim; ++j) {
            a[j] = (((mask >> j) & 1u) ? 1.0 : 0.0) - z_last;
        }
        const double y = values[ci] - ex.phi0 - z_last * span;
        for (size_t j = 0; j < dim; ++j) {
            if (a[j] == 0.0) {
                continue;
            }
            r[j] += w * y * a[j];
            for (size_t k = 0; k < dim; ++k) {
                h[j * dim + k] += w * a[j] * a[k];
            }
        }
    }
    std::vector<double> sol;
    if (!solve_linear(h, r, dim, sol)) {
        // near-singular fit: retry with a tiny ridge term
        ex.ridge_fallback = true;
        std::vector<double> h_ridge = h;
        for (size_t j = 0; j < dim; ++j) {
            h_ridge[j * dim + j] += 1e-10;
        }
        if (!solve_linear(h_ridge, r, dim, sol)) {
            throw NumericError("kernel_shap regression is singular even with ridge fallback");
        }
    }
    double sum = 0.0;
    for (size_t j = 0; j < dim; ++j) {
        ex.phi[j] = sol[j];
        sum += sol[j];
    }
    ex.phi[m - 1] = span - sum;
    return ex;
}

}  // namespace fedhunter::shap
