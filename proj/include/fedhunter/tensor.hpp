#ifndef FEDHUNTER_TENSOR_HPP
#define FEDHUNTER_TENSOR_HPP

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedhunter::nn {

// Dense row-major float64 tensor. Kept deliberately plain: the fixed
// architectures do their math on flat arrays, this is the exchange type
// for checkpoints and federated updates.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (numel(shape) != data.size()) {
            throw std::invalid_argument("tensor shape/data mismatch");
        }
    }

    static size_t numel(const std::vector<size_t>& shape) {
        size_t n = 1;
        for (size_t s : shape) n *= s;
        return n;
    }

    static Tensor zeros(std::vector<size_t> shape) {
        const size_t n = numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0));
    }

    size_t size() const { return data.size(); }
};

// A named view onto a model's parameter (and optionally its gradient)
// storage. Models expose these for the optimizer, checkpoints and FedAvg.
struct ParamRef {
    std::string name;
    std::vector<size_t> shape;
    std::vector<double>* value = nullptr;
    std::vector<double>* grad = nullptr;  // null for non-trainable state
};

inline std::string shape_str(const std::vector<size_t>& shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

}  // namespace fedhunter::nn

#endif
