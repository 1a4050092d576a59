#include "fedhunter/optimizer.hpp"

#include <cmath>

#include "fedhunter/common.hpp"

namespace fedhunter::nn {

void adam_step(const std::vector<ParamRef>& params, AdamState& state, double lr) {
    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (const auto& p : params) {
        if (!p.grad) {
            continue;
        }
        auto& m = state.m[p.name];
        auto& v = state.v[p.name];
        if (m.empty()) {
            m.assign(p.value->size(), 0.0);
            v.assign(p.value->size(), 0.0);
        }
        auto& val = *p.value;
        const auto& g = *p.grad;
        for (size_t i = 0; i < val.size(); ++i) {
            if (std::isnan(g[i])) {
                throw NumericError("NaN gradient in " + p.name);
            }
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            val[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace fedhunter::nn
