#ifndef FEDHUNTER_LAYERS_HPP
#define FEDHUNTER_LAYERS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fedhunter/rng.hpp"
#include "fedhunter/tensor.hpp"

namespace fedhunter::nn {

// Batched layout conventions:
//   matrix (B, N)      -> index b*N + n
//   sequence (B, T, C) -> index (b*T + t)*C + c
// Forward caches what backward needs; backward accumulates parameter
// gradients and returns the input gradient.

void glorot_init(std::vector<double>& w, size_t fan_in, size_t fan_out, Rng& rng);

double sigmoid(double x);

// y = relu(x); mask recoverable from y > 0
void relu_inplace(std::vector<double>& x);
// dx = g where y > 0 else 0
std::vector<double> relu_backward(const std::vector<double>& y, const std::vector<double>& g);

// row-wise softmax over (B, C)
std::vector<double> softmax_rows(const std::vector<double>& logits, size_t B, size_t C);

struct Dense {
    size_t in = 0;
    size_t out = 0;
    std::vector<double> W;  // out x in
    std::vector<double> b;
    std::vector<double> dW;
    std::vector<double> db;

    void init(size_t in_dim, size_t out_dim, Rng& rng);
    std::vector<double> forward(const std::vector<double>& x, size_t B) const;
    // x is the forward input; accumulates dW/db
    std::vector<double> backward(const std::vector<double>& x, const std::vector<double>& g,
                                 size_t B);
    void zero_grad();
    void collect(const std::string& prefix, std::vector<ParamRef>& refs);
};

// kernel 3, stride 1, zero-padded so T is preserved
struct Conv1D {
    static constexpr size_t kKernel = 3;
    size_t in_ch = 0;
    size_t out_ch = 0;
    std::vector<double> W;  // out_ch x in_ch x 3
    std::vector<double> b;
    std::vector<double> dW;
    std::vector<double> db;

    void init(size_t in_channels, size_t out_channels, Rng& rng);
    std::vector<double> forward(const std::vector<double>& x, size_t B, size_t T) const;
    std::vector<double> backward(const std::vector<double>& x, const std::vector<double>& g,
                                 size_t B, size_t T);
    void zero_grad();
    void collect(const std::string& prefix, std::vector<ParamRef>& refs);
};

// per-channel normalization over (B, T); training uses batch statistics,
// inference the running estimates
struct BatchNorm1D {
    size_t ch = 0;
    double eps = 1e-3;
    double momentum = 0.99;
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    std::vector<double> dgamma;
    std::vector<double> dbeta;

    struct Cache {
        std::vector<double> xhat;
        std::vector<double> inv_std;     // per channel
        std::vector<double> batch_mean;  // training only
        std::vector<double> batch_var;
        bool training = false;
        size_t B = 0;
        size_t T = 0;
    };

    void init(size_t channels);
    // const: training mode reads batch statistics into the cache, the
    // running estimates move only via commit_running
    std::vector<double> forward(const std::vector<double>& x, size_t B, size_t T, bool training,
                                Cache* cache) const;
    void commit_running(const Cache& cache);
    std::vector<double> backward(const Cache& cache, const std::vector<double>& g);
    void zero_grad();
    void collect(const std::string& prefix, std::vector<ParamRef>& refs);
};

// pool 2, stride 1, right-padded: out[t] = max(x[t], x[t+1]), out[T-1] = x[T-1]
struct MaxPool1D {
    struct Cache {
        std::vector<uint8_t> take_next;  // 1 when the t+1 element won
        size_t B = 0, T = 0, C = 0;
    };
    static std::vector<double> forward(const std::vector<double>& x, size_t B, size_t T, size_t C,
                                       Cache* cache);
    static std::vector<double> backward(const Cache& cache, const std::vector<double>& g);
};

// standard update/reset-gate cell, h_t = (1-z_t) . h_{t-1} + z_t . h~_t,
// returns the final hidden state
struct Gru {
    size_t in = 0;
    size_t hidden = 0;
    std::vector<double> Wz, Wr, Wh;  // hidden x in
    std::vector<double> Uz, Ur, Uh;  // hidden x hidden
    std::vector<double> bz, br, bh;
    std::vector<double> dWz, dWr, dWh, dUz, dUr, dUh, dbz, dbr, dbh;

    struct Cache {
        std::vector<double> x;                  // (B,T,in)
        std::vector<double> h;                  // (T+1,B,H), h[0] = 0
        std::vector<double> z, r, hbar;         // (T,B,H)
        size_t B = 0, T = 0;
    };

    void init(size_t in_dim, size_t hidden_dim, Rng& rng);
    std::vector<double> forward(const std::vector<double>& x, size_t B, size_t T,
                                Cache* cache) const;
    // g_h: gradient on the final hidden state (B,H); returns dx (B,T,in)
    std::vector<double> backward(const Cache& cache, const std::vector<double>& g_h);
    void zero_grad();
    void collect(const std::string& prefix, std::vector<ParamRef>& refs);
};

}  // namespace fedhunter::nn

#endif
