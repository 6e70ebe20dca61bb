#pragma once

#include <memory>
#include <string>
#include <utility>

#include "gms/ops.hpp"

namespace gms {

// -------------------------------------------------------------------------
// activation / normalization kernels
// -------------------------------------------------------------------------

// y = x where x > 0, a_c * x otherwise; `a` carries one slope per channel.
template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& a) {
    size_t batch, inner;
    int C;
    detail::channel_geometry(x, a, "prelu", batch, C, inner);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (size_t n = 0; n < batch; ++n)
        for (int c = 0; c < C; ++c) {
            const size_t off = (n * C + c) * inner;
            const T ac = a.data()[c];
            for (size_t i = 0; i < inner; ++i) {
                T v = x.data()[off + i];
                out.data()[off + i] = v > T(0) ? v : ac * v;
            }
        }
    if (Tensor<T>::should_record({&x, &a})) {
        Tensor<T>::attach(out, {x, a}, [x, a, batch, C, inner](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            std::vector<T>* dx = ctx.grad(0);
            std::vector<T>* da = ctx.grad(1);
            for (size_t n = 0; n < batch; ++n)
                for (int c = 0; c < C; ++c) {
                    const size_t off = (n * C + c) * inner;
                    const T ac = a.data()[c];
                    T acc = T(0);
                    for (size_t i = 0; i < inner; ++i) {
                        T v = x.data()[off + i];
                        if (dx) (*dx)[off + i] += g[off + i] * (v > T(0) ? T(1) : ac);
                        if (v <= T(0)) acc += g[off + i] * v;
                    }
                    if (da) (*da)[static_cast<size_t>(c)] += acc;
                }
        });
    }
    return out;
}

// Per-(sample, group) normalization to zero mean / unit variance with
// eps-stabilized variance, then per-channel affine.
template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, int num_groups, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps) {
    detail::check_rank(x, 4, "group_norm");
    const int N = x.dim(0), C = x.dim(1);
    const size_t HW = static_cast<size_t>(x.dim(2)) * x.dim(3);
    if (num_groups < 1 || C % num_groups != 0)
        throw ConfigError(strfmt("group_norm: num_groups %d must divide channels %d", num_groups, C));
    if (gamma.rank() != 1 || gamma.dim(0) != C || beta.rank() != 1 || beta.dim(0) != C)
        throw DimensionError("group_norm: gamma/beta must be rank-1 of length C");
    const int Cg = C / num_groups;
    const size_t M = static_cast<size_t>(Cg) * HW;  // elements per (sample, group)

    Tensor<T> out = Tensor<T>::zeros(x.shape());
    auto xhat = std::make_shared<std::vector<T>>(x.numel());
    auto invstd = std::make_shared<std::vector<T>>(static_cast<size_t>(N) * num_groups);

    for (int n = 0; n < N; ++n)
        for (int gidx = 0; gidx < num_groups; ++gidx) {
            const size_t off = (static_cast<size_t>(n) * C + static_cast<size_t>(gidx) * Cg) * HW;
            // two-pass mean / variance
            T mu = T(0);
            for (size_t i = 0; i < M; ++i) mu += x.data()[off + i];
            mu /= static_cast<T>(M);
            T var = T(0);
            for (size_t i = 0; i < M; ++i) {
                T d = x.data()[off + i] - mu;
                var += d * d;
            }
            var /= static_cast<T>(M);
            const T inv = T(1) / std::sqrt(var + eps);
            (*invstd)[static_cast<size_t>(n) * num_groups + gidx] = inv;
            for (int cc = 0; cc < Cg; ++cc) {
                const int c = gidx * Cg + cc;
                const T gam = gamma.data()[c], bet = beta.data()[c];
                const size_t coff = off + static_cast<size_t>(cc) * HW;
                for (size_t i = 0; i < HW; ++i) {
                    T xh = (x.data()[coff + i] - mu) * inv;
                    (*xhat)[coff + i] = xh;
                    out.data()[coff + i] = gam * xh + bet;
                }
            }
        }

    if (Tensor<T>::should_record({&x, &gamma, &beta})) {
        Tensor<T>::attach(
            out, {x, gamma, beta},
            [gamma, xhat, invstd, N, C, Cg, HW, M, num_groups](const std::vector<T>& g, BackwardCtx<T>& ctx) {
                std::vector<T>* dx = ctx.grad(0);
                std::vector<T>* dgam = ctx.grad(1);
                std::vector<T>* dbet = ctx.grad(2);
                if (dgam || dbet) {
                    for (int n = 0; n < N; ++n)
                        for (int c = 0; c < C; ++c) {
                            const size_t off = (static_cast<size_t>(n) * C + c) * HW;
                            T sg = T(0), sgx = T(0);
                            for (size_t i = 0; i < HW; ++i) {
                                sg += g[off + i];
                                sgx += g[off + i] * (*xhat)[off + i];
                            }
                            if (dbet) (*dbet)[static_cast<size_t>(c)] += sg;
                            if (dgam) (*dgam)[static_cast<size_t>(c)] += sgx;
                        }
                }
                if (dx) {
                    for (int n = 0; n < N; ++n)
                        for (int gidx = 0; gidx < num_groups; ++gidx) {
                            const size_t off =
                                (static_cast<size_t>(n) * C + static_cast<size_t>(gidx) * Cg) * HW;
                            const T inv = (*invstd)[static_cast<size_t>(n) * num_groups + gidx];
                            // gi = g * gamma_c per element; dx = inv*(gi - mean(gi) - xhat*mean(gi*xhat))
                            T m1 = T(0), m2 = T(0);
                            for (int cc = 0; cc < Cg; ++cc) {
                                const T gam = gamma.data()[gidx * Cg + cc];
                                const size_t coff = off + static_cast<size_t>(cc) * HW;
                                for (size_t i = 0; i < HW; ++i) {
                                    T gi = g[coff + i] * gam;
                                    m1 += gi;
                                    m2 += gi * (*xhat)[coff + i];
                                }
                            }
                            m1 /= static_cast<T>(M);
                            m2 /= static_cast<T>(M);
                            for (int cc = 0; cc < Cg; ++cc) {
                                const T gam = gamma.data()[gidx * Cg + cc];
                                const size_t coff = off + static_cast<size_t>(cc) * HW;
                                for (size_t i = 0; i < HW; ++i) {
                                    T gi = g[coff + i] * gam;
                                    (*dx)[coff + i] += inv * (gi - m1 - (*xhat)[coff + i] * m2);
                                }
                            }
                        }
                }
            });
    }
    return out;
}

// -------------------------------------------------------------------------
// parameterized layers
// -------------------------------------------------------------------------

inline int default_gn_groups(int channels) {
    if (channels < 8) return channels;
    if (channels % 8 == 0) return 8;
    for (int g = 7; g > 1; --g)
        if (channels % g == 0) return g;
    return 1;
}

template <typename T>
using ParamList = std::vector<std::pair<std::string, Tensor<T>>>;

template <typename T>
struct Conv2dLayer {
    Tensor<T> w;  // [Cout,Cin,kh,kw]
    Tensor<T> b;  // [Cout]
    int stride = 1;
    int pad = 0;

    Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, w, b, stride, pad); }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        out.emplace_back(prefix + ".w", w);
        out.emplace_back(prefix + ".b", b);
    }
};

// Kaiming-style uniform: weights ~ U(+-sqrt(6/fan_in)), bias zero.
template <typename T>
Conv2dLayer<T> make_conv(int cin, int cout, int k, int stride, int pad, Rng& rng) {
    Conv2dLayer<T> l;
    const int fan_in = cin * k * k;
    const T bound = static_cast<T>(std::sqrt(6.0 / fan_in));
    l.w = Tensor<T>::uniform({cout, cin, k, k}, -bound, bound, rng);
    l.b = Tensor<T>::zeros({cout});
    l.stride = stride;
    l.pad = pad;
    l.w.set_requires_grad(true);
    l.b.set_requires_grad(true);
    return l;
}

// Conv (3x3, stride 1, pad 1) -> PReLU -> GroupNorm; spatial size preserved.
template <typename T>
struct ConvBlock {
    Conv2dLayer<T> conv;
    Tensor<T> prelu_a;
    Tensor<T> gn_gamma, gn_beta;
    int gn_groups = 8;
    T gn_eps = static_cast<T>(1e-5);

    Tensor<T> forward(const Tensor<T>& x) const {
        return group_norm(prelu(conv.forward(x), prelu_a), gn_groups, gn_gamma, gn_beta, gn_eps);
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        conv.collect(prefix + ".conv", out);
        out.emplace_back(prefix + ".prelu_a", prelu_a);
        out.emplace_back(prefix + ".gn_gamma", gn_gamma);
        out.emplace_back(prefix + ".gn_beta", gn_beta);
    }
};

template <typename T>
ConvBlock<T> make_conv_block(int cin, int cout, Rng& rng, int gn_groups = 0) {
    ConvBlock<T> blk;
    blk.conv = make_conv<T>(cin, cout, 3, 1, 1, rng);
    blk.prelu_a = Tensor<T>::full({cout}, static_cast<T>(0.25));
    blk.gn_gamma = Tensor<T>::full({cout}, T(1));
    blk.gn_beta = Tensor<T>::zeros({cout});
    blk.gn_groups = gn_groups > 0 ? gn_groups : default_gn_groups(cout);
    blk.prelu_a.set_requires_grad(true);
    blk.gn_gamma.set_requires_grad(true);
    blk.gn_beta.set_requires_grad(true);
    return blk;
}

// Single-head spatial self-attention. Q/K/V come from 1x1 convolutions with
// bias; spatial positions form the sequence; output is residual-added to the
// input feature map.
template <typename T>
struct SelfAttention2d {
    Conv2dLayer<T> q, k, v;
    int d_k = 0;  // channel count of K

    Tensor<T> forward(const Tensor<T>& f) const {
        detail::check_rank(f, 4, "self_attention");
        const int N = f.dim(0), C = f.dim(1), H = f.dim(2), W = f.dim(3);
        if (q.w.dim(1) != C)
            throw DimensionError(strfmt("self_attention: input channels %d != layer channels %d", C,
                                        q.w.dim(1)));
        const int L = H * W;
        Tensor<T> Q = q.forward(f), K = k.forward(f), V = v.forward(f);
        Tensor<T> Qt = transpose_last2(reshape(Q, {N, C, L}));  // [N,L,C]
        Tensor<T> Kf = reshape(K, {N, C, L});                   // [N,C,L]
        Tensor<T> Vt = transpose_last2(reshape(V, {N, C, L}));  // [N,L,C]
        Tensor<T> scores = scale(matmul(Qt, Kf), static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_k))));
        Tensor<T> attn = softmax_lastdim(scores);               // [N,L,L]
        Tensor<T> ctx = transpose_last2(matmul(attn, Vt));      // [N,C,L]
        return add(reshape(ctx, {N, C, H, W}), f);
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        q.collect(prefix + ".q", out);
        k.collect(prefix + ".k", out);
        v.collect(prefix + ".v", out);
    }
};

template <typename T>
SelfAttention2d<T> make_self_attention(int channels, Rng& rng) {
    SelfAttention2d<T> a;
    a.q = make_conv<T>(channels, channels, 1, 1, 0, rng);
    a.k = make_conv<T>(channels, channels, 1, 1, 0, rng);
    a.v = make_conv<T>(channels, channels, 1, 1, 0, rng);
    a.d_k = channels;
    return a;
}

}  // namespace gms
