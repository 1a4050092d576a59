#ifndef FEDHUNTER_OPTIMIZER_HPP
#define FEDHUNTER_OPTIMIZER_HPP

#include <map>
#include <string>
#include <vector>

#include "fedhunter/tensor.hpp"

namespace fedhunter::nn {

// Adam with bias correction. Moment buffers are keyed by parameter name
// and created lazily on the first step.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::map<std::string, std::vector<double>> m;
    std::map<std::string, std::vector<double>> v;
};

// One update over every trainable param (grad != null). Throws
// NumericError on NaN gradients.
void adam_step(const std::vector<ParamRef>& params, AdamState& state, double lr);

}  // namespace fedhunter::nn

#endif
