#include "fedhunter/layers.hpp"

#include <algorithm>
#include <cmath>

namespace fedhunter::nn {

void glorot_init(std::vector<double>& w, size_t fan_in, size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w) {
        v = rng.uniform(-limit, limit);
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void relu_inplace(std::vector<double>& x) {
    for (double& v : x) {
        v = v > 0.0 ? v : 0.0;
    }
}

std::vector<double> relu_backward(const std::vector<double>& y, const std::vector<double>& g) {
    std::vector<double> dx(g.size());
    for (size_t i = 0; i < g.size(); ++i) {
        dx[i] = y[i] > 0.0 ? g[i] : 0.0;
    }
    return dx;
}

std::vector<double> softmax_rows(const std::vector<double>& logits, size_t B, size_t C) {
    std::vector<double> out(logits.size());
    for (size_t b = 0; b < B; ++b) {
        const double* l = logits.data() + b * C;
        double* o = out.data() + b * C;
        double mx = l[0];
        for (size_t c = 1; c < C; ++c) {
            mx = std::max(mx, l[c]);
        }
        double sum = 0.0;
        for (size_t c = 0; c < C; ++c) {
            o[c] = std::exp(l[c] - mx);
            sum += o[c];
        }
        for (size_t c = 0; c < C; ++c) {
            o[c] /= sum;
        }
    }
    return out;
}

// ---------------------------------------------------------------- Dense

void Dense::init(size_t in_dim, size_t out_dim, Rng& rng) {
    in = in_dim;
    out = out_dim;
    W.assign(out * in, 0.0);
    b.assign(out, 0.0);
    glorot_init(W, in, out, rng);
    zero_grad();
}

std::vector<double> Dense::forward(const std::vector<double>& x, size_t B) const {
    std::vector<double> y(B * out);
    for (size_t bi = 0; bi < B; ++bi) {
        const double* xb = x.data() + bi * in;
        double* yb = y.data() + bi * out;
        for (size_t o = 0; o < out; ++o) {
            const double* w = W.data() + o * in;
            double acc = b[o];
            for (size_t i = 0; i < in; ++i) {
                acc += w[i] * xb[i];
            }
            yb[o] = acc;
        }
    }
    return y;
}

std::vector<double> Dense::backward(const std::vector<double>& x, const std::vector<double>& g,
                                    size_t B) {
    std::vector<double> dx(B * in, 0.0);
    for (size_t bi = 0; bi < B; ++bi) {
        const double* xb = x.data() + bi * in;
        const double* gb = g.data() + bi * out;
        double* dxb = dx.data() + bi * in;
        for (size_t o = 0; o < out; ++o) {
            const double go = gb[o];
            db[o] += go;
            double* dw = dW.data() + o * in;
            const double* w = W.data() + o * in;
            for (size_t i = 0; i < in; ++i) {
                dw[i] += go * xb[i];
                dxb[i] += go * w[i];
            }
        }
    }
    return dx;
}

void Dense::zero_grad() {
    dW.assign(W.size(), 0.0);
    db.assign(b.size(), 0.0);
}

void Dense::collect(const std::string& prefix, std::vector<ParamRef>& refs) {
    refs.push_back({prefix + ".W", {out, in}, &W, &dW});
    refs.push_back({prefix + ".b", {out}, &b, &db});
}

// ---------------------------------------------------------------- Conv1D

void Conv1D::init(size_t in_channels, size_t out_channels, Rng& rng) {
    in_ch = in_channels;
    out_ch = out_channels;
    W.assign(out_ch * in_ch * kKernel, 0.0);
    b.assign(out_ch, 0.0);
    glorot_init(W, in_ch * kKernel, out_ch * kKernel, rng);
    zero_grad();
}

std::vector<double> Conv1D::forward(const std::vector<double>& x, size_t B, size_t T) const {
    std::vector<double> y(B * T * out_ch);
    for (size_t bi = 0; bi < B; ++bi) {
        for (size_t t = 0; t < T; ++t) {
            double* yo = y.data() + (bi * T + t) * out_ch;
            for (size_t co = 0; co < out_ch; ++co) {
                double acc = b[co];
                const double* w = W.data() + co * in_ch * kKernel;
                for (size_t k = 0; k < kKernel; ++k) {
                    const long ti = static_cast<long>(t) + static_cast<long>(k) - 1;
                    if (ti < 0 || ti >= static_cast<long>(T)) {
                        continue;
                    }
                    const double* xi = x.data() + (bi * T + static_cast<size_t>(ti)) * in_ch;
                    for (size_t ci = 0; ci < in_ch; ++ci) {
                        acc += w[ci * kKernel + k] * xi[ci];
                    }
                }
                yo[co] = acc;
            }
        }
    }
    return y;
}

std::vector<double> Conv1D::backward(const std::vector<double>& x, const std::vector<double>& g,
                                     size_t B, size_t T) {
    std::vector<double> dx(B * T * in_ch, 0.0);
    for (size_t bi = 0; bi < B; ++bi) {
        for (size_t t = 0; t < T; ++t) {
            const double* go = g.data() + (bi * T + t) * out_ch;
            for (size_t co = 0; co < out_ch; ++co) {
                const double gv = go[co];
                db[co] += gv;
                double* dw = dW.data() + co * in_ch * kKernel;
                const double* w = W.data() + co * in_ch * kKernel;
                for (size_t k = 0; k < kKernel; ++k) {
                    const long ti = static_cast<long>(t) + static_cast<long>(k) - 1;
                    if (ti < 0 || ti >= static_cast<long>(T)) {
                        continue;
                    }
                    const size_t off = (bi * T + static_cast<size_t>(ti)) * in_ch;
                    for (size_t ci = 0; ci < in_ch; ++ci) {
                        dw[ci * kKernel + k] += gv * x[off + ci];
                        dx[off + ci] += gv * w[ci * kKernel + k];
                    }
                }
            }
        }
    }
    return dx;
}

void Conv1D::zero_grad() {
    dW.assign(W.size(), 0.0);
    db.assign(b.size(), 0.0);
}

void Conv1D::collect(const std::string& prefix, std::vector<ParamRef>& refs) {
    refs.push_back({prefix + ".W", {out_ch, in_ch, kKernel}, &W, &dW});
    refs.push_back({prefix + ".b", {out_ch}, &b, &db});
}

// ---------------------------------------------------------------- BatchNorm1D

void BatchNorm1D::init(size_t channels) {
    ch = channels;
    gamma.assign(ch, 1.0);
    beta.assign(ch, 0.0);
    running_mean.assign(ch, 0.0);
    running_var.assign(ch, 1.0);
    zero_grad();
}

std::vector<double> BatchNorm1D::forward(const std::vector<double>& x, size_t B, size_t T,
                                         bool training, Cache* cache) const {
    const size_t n = B * T;
    std::vector<double> y(x.size());
    std::vector<double> mean(ch, 0.0), var(ch, 0.0), inv_std(ch, 0.0);
    if (training) {
        for (size_t i = 0; i < n; ++i) {
            const double* xi = x.data() + i * ch;
            for (size_t c = 0; c < ch; ++c) {
                mean[c] += xi[c];
            }
        }
        for (size_t c = 0; c < ch; ++c) {
            mean[c] /= static_cast<double>(n);
        }
        for (size_t i = 0; i < n; ++i) {
            const double* xi = x.data() + i * ch;
            for (size_t c = 0; c < ch; ++c) {
                const double d = xi[c] - mean[c];
                var[c] += d * d;
            }
        }
        for (size_t c = 0; c < ch; ++c) {
            var[c] /= static_cast<double>(n);
        }
    } else {
        mean = running_mean;
        var = running_var;
    }
    for (size_t c = 0; c < ch; ++c) {
        inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    }
    std::vector<double> xhat(x.size());
    for (size_t i = 0; i < n; ++i) {
        const double* xi = x.data() + i * ch;
        double* yi = y.data() + i * ch;
        double* xh = xhat.data() + i * ch;
        for (size_t c = 0; c < ch; ++c) {
            xh[c] = (xi[c] - mean[c]) * inv_std[c];
            yi[c] = gamma[c] * xh[c] + beta[c];
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
        cache->training = training;
        if (training) {
            cache->batch_mean = std::move(mean);
            cache->batch_var = std::move(var);
        }
        cache->B = B;
        cache->T = T;
    }
    return y;
}

void BatchNorm1D::commit_running(const Cache& cache) {
    if (!cache.training) {
        return;
    }
    for (size_t c = 0; c < ch; ++c) {
        running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * cache.batch_mean[c];
        running_var[c] = momentum * running_var[c] + (1.0 - momentum) * cache.batch_var[c];
    }
}

std::vector<double> BatchNorm1D::backward(const Cache& cache, const std::vector<double>& g) {
    const size_t n = cache.B * cache.T;
    std::vector<double> sum_g(ch, 0.0), sum_gx(ch, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const double* gi = g.data() + i * ch;
        const double* xh = cache.xhat.data() + i * ch;
        for (size_t c = 0; c < ch; ++c) {
            sum_g[c] += gi[c];
            sum_gx[c] += gi[c] * xh[c];
        }
    }
    for (size_t c = 0; c < ch; ++c) {
        dbeta[c] += sum_g[c];
        dgamma[c] += sum_gx[c];
    }
    std::vector<double> dx(g.size());
    if (!cache.training) {
        // inference is a fixed affine map
        for (size_t i = 0; i < n; ++i) {
            const double* gi = g.data() + i * ch;
            double* dxi = dx.data() + i * ch;
            for (size_t c = 0; c < ch; ++c) {
                dxi[c] = gi[c] * gamma[c] * cache.inv_std[c];
            }
        }
        return dx;
    }
    // batch statistics couple the whole channel:
    // dx = inv_std/N * gamma * (N*g - sum(g) - xhat * sum(g*xhat))
    const double inv_n = 1.0 / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        const double* gi = g.data() + i * ch;
        const double* xh = cache.xhat.data() + i * ch;
        double* dxi = dx.data() + i * ch;
        for (size_t c = 0; c < ch; ++c) {
            dxi[c] = gamma[c] * cache.inv_std[c] * inv_n *
                     (static_cast<double>(n) * gi[c] - sum_g[c] - xh[c] * sum_gx[c]);
        }
    }
    return dx;
}

void BatchNorm1D::zero_grad() {
    dgamma.assign(ch, 0.0);
    dbeta.assign(ch, 0.0);
}

void BatchNorm1D::collect(const std::string& prefix, std::vector<ParamRef>& refs) {
    refs.push_back({prefix + ".gamma", {ch}, &gamma, &dgamma});
    refs.push_back({prefix + ".beta", {ch}, &beta, &dbeta});
    // running statistics travel with the model but are not trained
    refs.push_back({prefix + ".running_mean", {ch}, &running_mean, nullptr});
    refs.push_back({prefix + ".running_var", {ch}, &running_var, nullptr});
}

// ---------------------------------------------------------------- MaxPool1D

std::vector<double> MaxPool1D::forward(const std::vector<double>& x, size_t B, size_t T, size_t C,
                                       Cache* cache) {
    std::vector<double> y(x.size());
    std::vector<uint8_t> take_next(x.size(), 0);
    for (size_t b = 0; b < B; ++b) {
        for (size_t t = 0; t < T; ++t) {
            const size_t off = (b * T + t) * C;
            const bool has_next = t + 1 < T;
            const size_t off_next = has_next ? off + C : off;
            for (size_t c = 0; c < C; ++c) {
                const double a = x[off + c];
                const double nb = x[off_next + c];
                if (has_next && nb > a) {
                    y[off + c] = nb;
                    take_next[off + c] = 1;
                } else {
                    y[off + c] = a;
                }
            }
        }
    }
    if (cache) {
        cache->take_next = std::move(take_next);
        cache->B = B;
        cache->T = T;
        cache->C = C;
    }
    return y;
}

std::vector<double> MaxPool1D::backward(const Cache& cache, const std::vector<double>& g) {
    std::vector<double> dx(g.size(), 0.0);
    const size_t C = cache.C;
    for (size_t b = 0; b < cache.B; ++b) {
        for (size_t t = 0; t < cache.T; ++t) {
            const size_t off = (b * cache.T + t) * C;
            for (size_t c = 0; c < C; ++c) {
                dx[cache.take_next[off + c] ? off + C + c : off + c] += g[off + c];
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------- Gru

void Gru::init(size_t in_dim, size_t hidden_dim, Rng& rng) {
    in = in_dim;
    hidden = hidden_dim;
    auto init_mat = [&](std::vector<double>& w, size_t rows, size_t cols) {
        w.assign(rows * cols, 0.0);
        glorot_init(w, cols, rows, rng);
    };
    init_mat(Wz, hidden, in);
    init_mat(Wr, hidden, in);
    init_mat(Wh, hidden, in);
    init_mat(Uz, hidden, hidden);
    init_mat(Ur, hidden, hidden);
    init_mat(Uh, hidden, hidden);
    bz.assign(hidden, 0.0);
    br.assign(hidden, 0.0);
    bh.assign(hidden, 0.0);
    zero_grad();
}

std::vector<double> Gru::forward(const std::vector<double>& x, size_t B, size_t T,
                                 Cache* cache) const {
    const size_t H = hidden;
    std::vector<double> h((T + 1) * B * H, 0.0);
    std::vector<double> z(T * B * H), r(T * B * H), hbar(T * B * H);
    auto matvec = [&](const std::vector<double>& M, const double* v, size_t rows, size_t cols,
                      double* out_acc) {
        for (size_t i = 0; i < rows; ++i) {
            const double* m = M.data() + i * cols;
            double acc = 0.0;
            for (size_t j = 0; j < cols; ++j) {
                acc += m[j] * v[j];
            }
            out_acc[i] += acc;
        }
    };
    std::vector<double> tmp(H);
    for (size_t t = 0; t < T; ++t) {
        for (size_t b = 0; b < B; ++b) {
            const double* xt = x.data() + (b * T + t) * in;
            const double* hp = h.data() + (t * B + b) * H;
            double* ht = h.data() + ((t + 1) * B + b) * H;
            double* zt = z.data() + (t * B + b) * H;
            double* rt = r.data() + (t * B + b) * H;
            double* hb = hbar.data() + (t * B + b) * H;
            // z_t, r_t
            for (size_t i = 0; i < H; ++i) {
                zt[i] = bz[i];
                rt[i] = br[i];
            }
            matvec(Wz, xt, H, in, zt);
            matvec(Uz, hp, H, H, zt);
            matvec(Wr, xt, H, in, rt);
            matvec(Ur, hp, H, H, rt);
            for (size_t i = 0; i < H; ++i) {
                zt[i] = sigmoid(zt[i]);
                rt[i] = sigmoid(rt[i]);
            }
            // candidate state
            for (size_t i = 0; i < H; ++i) {
                hb[i] = bh[i];
                tmp[i] = rt[i] * hp[i];
            }
            matvec(Wh, xt, H, in, hb);
            matvec(Uh, tmp.data(), H, H, hb);
            for (size_t i = 0; i < H; ++i) {
                hb[i] = std::tanh(hb[i]);
                ht[i] = (1.0 - zt[i]) * hp[i] + zt[i] * hb[i];
            }
        }
    }
    std::vector<double> out(B * H);
    for (size_t b = 0; b < B; ++b) {
        for (size_t i = 0; i < H; ++i) {
            out[b * H + i] = h[(T * B + b) * H + i];
        }
    }
    if (cache) {
        cache->x = x;
        cache->h = std::move(h);
        cache->z = std::move(z);
        cache->r = std::move(r);
        cache->hbar = std::move(hbar);
        cache->B = B;
        cache->T = T;
    }
    return out;
}

std::vector<double> Gru::backward(const Cache& cache, const std::vector<double>& g_h) {
    const size_t B = cache.B, T = cache.T, H = hidden;
    std::vector<double> dx(B * T * in, 0.0);
    std::vector<double> dh(g_h);  // gradient on h_t, runs backwards
    std::vector<double> da_z(H), da_r(H), da_h(H), dr(H), dhp(H);
    auto matT_vec = [&](const std::vector<double>& M, const double* v, size_t rows, size_t cols,
                        double* out_acc) {
        // out (cols) += M^T (cols x rows) * v (rows)
        for (size_t i = 0; i < rows; ++i) {
            const double* m = M.data() + i * cols;
            const double vi = v[i];
            for (size_t j = 0; j < cols; ++j) {
                out_acc[j] += m[j] * vi;
            }
        }
    };
    auto outer_acc = [&](std::vector<double>& dM, const double* u, const double* v, size_t rows,
                         size_t cols) {
        for (size_t i = 0; i < rows; ++i) {
            double* m = dM.data() + i * cols;
            const double ui = u[i];
            for (size_t j = 0; j < cols; ++j) {
                m[j] += ui * v[j];
            }
        }
    };
    for (size_t t = T; t-- > 0;) {
        for (size_t b = 0; b < B; ++b) {
            const double* xt = cache.x.data() + (b * T + t) * in;
            const double* hp = cache.h.data() + (t * B + b) * H;
            const double* zt = cache.z.data() + (t * B + b) * H;
            const double* rt = cache.r.data() + (t * B + b) * H;
            const double* hb = cache.hbar.data() + (t * B + b) * H;
            double* dht = dh.data() + b * H;
            double* dxt = dx.data() + (b * T + t) * in;

            std::fill(dhp.begin(), dhp.end(), 0.0);
            for (size_t i = 0; i < H; ++i) {
                const double dhi = dht[i];
                const double dz = dhi * (hb[i] - hp[i]);
                const double dhb = dhi * zt[i];
                dhp[i] += dhi * (1.0 - zt[i]);
                da_z[i] = dz * zt[i] * (1.0 - zt[i]);
                da_h[i] = dhb * (1.0 - hb[i] * hb[i]);
            }
            // candidate path: a_h = Wh x + Uh (r . hp) + bh
            std::vector<double> d_rhp(H, 0.0);
            matT_vec(Uh, da_h.data(), H, H, d_rhp.data());
            for (size_t i = 0; i < H; ++i) {
                dr[i] = d_rhp[i] * hp[i];
                dhp[i] += d_rhp[i] * rt[i];
                da_r[i] = dr[i] * rt[i] * (1.0 - rt[i]);
                dbh[i] += da_h[i];
                dbz[i] += da_z[i];
                dbr[i] += da_r[i];
            }
            std::vector<double> rhp(H);
            for (size_t i = 0; i < H; ++i) {
                rhp[i] = rt[i] * hp[i];
            }
            outer_acc(dWh, da_h.data(), xt, H, in);
            outer_acc(dUh, da_h.data(), rhp.data(), H, H);
            outer_acc(dWz, da_z.data(), xt, H, in);
            outer_acc(dUz, da_z.data(), hp, H, H);
            outer_acc(dWr, da_r.data(), xt, H, in);
            outer_acc(dUr, da_r.data(), hp, H, H);
            matT_vec(Wh, da_h.data(), H, in, dxt);
            matT_vec(Wz, da_z.data(), H, in, dxt);
            matT_vec(Wr, da_r.data(), H, in, dxt);
            matT_vec(Uz, da_z.data(), H, H, dhp.data());
            matT_vec(Ur, da_r.data(), H, H, dhp.data());
            for (size_t i = 0; i < H; ++i) {
                dht[i] = dhp[i];
            }
        }
    }
    return dx;
}

void Gru::zero_grad() {
    dWz.assign(Wz.size(), 0.0);
    dWr.assign(Wr.size(), 0.0);
    dWh.assign(Wh.size(), 0.0);
    dUz.assign(Uz.size(), 0.0);
    dUr.assign(Ur.size(), 0.0);
    dUh.assign(Uh.size(), 0.0);
    dbz.assign(bz.size(), 0.0);
    dbr.assign(br.size(), 0.0);
    dbh.assign(bh.size(), 0.0);
}

void Gru::collect(const std::string& prefix, std::vector<ParamRef>& refs) {
    refs.push_back({prefix + ".Wz", {hidden, in}, &Wz, &dWz});
    refs.push_back({prefix + ".Wr", {hidden, in}, &Wr, &dWr});
    refs.push_back({prefix + ".Wh", {hidden, in}, &Wh, &dWh});
    refs.push_back({prefix + ".Uz", {hidden, hidden}, &Uz, &dUz});
    refs.push_back({prefix + ".Ur", {hidden, hidden}, &Ur, &dUr});
    refs.push_back({prefix + ".Uh", {hidden, hidden}, &Uh, &dUh});
    refs.push_back({prefix + ".bz", {hidden}, &bz, &dbz});
    refs.push_back({prefix + ".br", {hidden}, &br, &dbr});
    refs.push_back({prefix + ".bh", {hidden}, &bh, &dbh});
}

}  // namespace fedhunter::nn
