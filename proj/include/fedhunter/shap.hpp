#ifndef FEDHUNTER_SHAP_HPP
#define FEDHUNTER_SHAP_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

namespace fedhunter::shap {

// Scalar predictor over an M-dim input. Must be safe to call concurrently.
using Predictor = std::function<double(const std::vector<double>&)>;

// Masking by background imputation: an absent feature takes its value
// from a background sample, and the masked prediction is the average of
// f over all background samples.
struct MaskingConfig {
    std::vector<std::vector<double>> background;
};

struct ShapExplanation {
    double phi0 = 0.0;
    std::vector<double> phi;
    std::vector<std::string> feature_names;
    double f_x = 0.0;
    std::string mode;
    uint64_t seed = 0;
    bool ridge_fallback = false;

    nlohmann::json to_json() const;
};

// Shapley kernel (M-1) / (C(M,s) * s * (M-s)) for interior sizes.
double shapley_kernel_weight(size_t m, size_t subset_size);

// Exact Shapley values by full coalition enumeration (M <= 20); the sign
// convention makes phi0 + sum(phi) = f(x).
ShapExplanation shapley_exact(const Predictor& f, const std::vector<double>& x,
                              const MaskingConfig& masking);

// Weighted least squares fit of the additive surrogate under the Shapley
// kernel, with the empty and full coalitions as hard constraints. All
// 2^M - 2 interior coalitions are enumerated when they fit the budget,
// otherwise coalitions are drawn by kernel-proportional stratified
// sampling over subset sizes.
ShapExplanation kernel_shap(const Predictor& f, const std::vector<double>& x,
                            const MaskingConfig& masking, size_t coalition_budget,
                            uint64_t seed = 0);

}  // namespace fedhunter::shap

#endif
