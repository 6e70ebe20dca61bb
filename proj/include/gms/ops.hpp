#pragma once

#include <algorithm>
#include <cmath>

#include "gms/gemm.hpp"
#include "gms/tensor.hpp"

// Primitive differentiable kernels. All reductions run in a fixed ascending
// order so repeated runs are bit-identical.

namespace gms {

namespace detail {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(strfmt("%s: shape mismatch %s vs %s", op, shape_str(a.shape()).c_str(),
                                    shape_str(b.shape()).c_str()));
}

template <typename T>
void check_rank(const Tensor<T>& t, int rank, const char* op) {
    if (t.rank() != rank)
        throw DimensionError(strfmt("%s: expected rank-%d tensor, got %s", op, rank,
                                    shape_str(t.shape()).c_str()));
}

// cols is [Cin*kh*kw, Hout*Wout]; zero padding outside the input.
template <typename T>
void im2col(const T* x, int Cin, int H, int W, int kh, int kw, int stride, int pad, int Hout,
            int Wout, T* cols) {
    const size_t P = static_cast<size_t>(Hout) * Wout;
    for (int c = 0; c < Cin; ++c) {
        const T* xc = x + static_cast<size_t>(c) * H * W;
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                T* row = cols + (static_cast<size_t>(c) * kh * kw + static_cast<size_t>(i) * kw + j) * P;
                for (int oy = 0; oy < Hout; ++oy) {
                    int iy = oy * stride + i - pad;
                    if (iy < 0 || iy >= H) {
                        std::fill(row + static_cast<size_t>(oy) * Wout,
                                  row + static_cast<size_t>(oy + 1) * Wout, T(0));
                        continue;
                    }
                    const T* xrow = xc + static_cast<size_t>(iy) * W;
                    T* orow = row + static_cast<size_t>(oy) * Wout;
                    for (int ox = 0; ox < Wout; ++ox) {
                        int ix = ox * stride + j - pad;
                        orow[ox] = (ix >= 0 && ix < W) ? xrow[ix] : T(0);
                    }
                }
            }
        }
    }
}

// scatter-add inverse of im2col
template <typename T>
void col2im_acc(const T* cols, int Cin, int H, int W, int kh, int kw, int stride, int pad, int Hout,
                int Wout, T* dx) {
    const size_t P = static_cast<size_t>(Hout) * Wout;
    for (int c = 0; c < Cin; ++c) {
        T* xc = dx + static_cast<size_t>(c) * H * W;
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                const T* row = cols + (static_cast<size_t>(c) * kh * kw + static_cast<size_t>(i) * kw + j) * P;
                for (int oy = 0; oy < Hout; ++oy) {
                    int iy = oy * stride + i - pad;
                    if (iy < 0 || iy >= H) continue;
                    T* xrow = xc + static_cast<size_t>(iy) * W;
                    const T* orow = row + static_cast<size_t>(oy) * Wout;
                    for (int ox = 0; ox < Wout; ++ox) {
                        int ix = ox * stride + j - pad;
                        if (ix >= 0 && ix < W) xrow[ix] += orow[ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// -------------------------------------------------------------------------
// convolution
// -------------------------------------------------------------------------

// Cross-correlation of x[N,Cin,H,W] with w[Cout,Cin,kh,kw] plus per-channel
// bias. Implemented as im2col + GEMM; the naive loop reference lives in the
// test tree.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int padding) {
    detail::check_rank(x, 4, "conv2d input");
    detail::check_rank(w, 4, "conv2d weight");
    detail::check_rank(b, 1, "conv2d bias");
    const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != Cin)
        throw DimensionError(strfmt("conv2d: input channel axis (dim 1) = %d but weight expects Cin = %d",
                                    Cin, w.dim(1)));
    if (b.dim(0) != Cout)
        throw DimensionError(strfmt("conv2d: bias length %d != Cout %d", b.dim(0), Cout));
    if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
    if (padding < 0) throw ConfigError("conv2d: padding must be >= 0");
    const int eh = H + 2 * padding - kh;
    const int ew = W + 2 * padding - kw;
    if (eh < 0 || ew < 0 || eh % stride != 0 || ew % stride != 0)
        throw ConfigError(strfmt(
            "conv2d: output size (H=%d,W=%d,k=%dx%d,stride=%d,pad=%d) is not a positive integer", H, W,
            kh, kw, stride, padding));
    const int Hout = eh / stride + 1;
    const int Wout = ew / stride + 1;
    const int K = Cin * kh * kw;
    const size_t P = static_cast<size_t>(Hout) * Wout;

    Tensor<T> out = Tensor<T>::zeros({N, Cout, Hout, Wout});
    std::vector<T> cols(static_cast<size_t>(K) * P);
    for (int n = 0; n < N; ++n) {
        detail::im2col(x.data() + static_cast<size_t>(n) * Cin * H * W, Cin, H, W, kh, kw, stride,
                       padding, Hout, Wout, cols.data());
        T* on = out.data() + static_cast<size_t>(n) * Cout * P;
        for (int c = 0; c < Cout; ++c)
            std::fill(on + static_cast<size_t>(c) * P, on + static_cast<size_t>(c + 1) * P, b.data()[c]);
        gemm_acc(w.data(), cols.data(), on, Cout, K, static_cast<int>(P));
    }

    if (Tensor<T>::should_record({&x, &w, &b})) {
        Tensor<T>::attach(out, {x, w, b}, [x, w, N, Cin, H, W, Cout, kh, kw, stride, padding, Hout,
                                           Wout, K, P](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            std::vector<T>* dx = ctx.grad(0);
            std::vector<T>* dw = ctx.grad(1);
            std::vector<T>* db = ctx.grad(2);
            if (db) {
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < Cout; ++c) {
                        const T* gr = g.data() + (static_cast<size_t>(n) * Cout + c) * P;
                        T acc = T(0);
                        for (size_t p = 0; p < P; ++p) acc += gr[p];
                        (*db)[static_cast<size_t>(c)] += acc;
                    }
            }
            std::vector<T> cols, colsT, wt, dcols;
            if (dw) {
                cols.resize(static_cast<size_t>(K) * P);
                colsT.resize(static_cast<size_t>(K) * P);
            }
            if (dx) {
                wt.resize(static_cast<size_t>(K) * Cout);
                transpose(w.data(), wt.data(), Cout, K);
                dcols.resize(static_cast<size_t>(K) * P);
            }
            for (int n = 0; n < N; ++n) {
                const T* gn = g.data() + static_cast<size_t>(n) * Cout * P;
                if (dw) {
                    detail::im2col(x.data() + static_cast<size_t>(n) * Cin * H * W, Cin, H, W, kh, kw,
                                   stride, padding, Hout, Wout, cols.data());
                    transpose(cols.data(), colsT.data(), K, static_cast<int>(P));
                    gemm_acc(gn, colsT.data(), dw->data(), Cout, static_cast<int>(P), K);
                }
                if (dx) {
                    std::fill(dcols.begin(), dcols.end(), T(0));
                    gemm_acc(wt.data(), gn, dcols.data(), K, Cout, static_cast<int>(P));
                    detail::col2im_acc(dcols.data(), Cin, H, W, kh, kw, stride, padding, Hout, Wout,
                                       dx->data() + static_cast<size_t>(n) * Cin * H * W);
                }
            }
        });
    }
    return out;
}

// -------------------------------------------------------------------------
// batched matmul / transpose / softmax
// -------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_rank(a, 3, "matmul lhs");
    detail::check_rank(b, 3, "matmul rhs");
    if (a.dim(0) != b.dim(0))
        throw DimensionError(strfmt("matmul: batch dims differ, %d vs %d", a.dim(0), b.dim(0)));
    if (a.dim(2) != b.dim(1))
        throw DimensionError(strfmt("matmul: inner dims differ, lhs K=%d vs rhs K=%d", a.dim(2), b.dim(1)));
    const int B = a.dim(0), M = a.dim(1), K = a.dim(2), N = b.dim(2);
    Tensor<T> out = Tensor<T>::zeros({B, M, N});
    for (int i = 0; i < B; ++i)
        gemm_acc(a.data() + static_cast<size_t>(i) * M * K, b.data() + static_cast<size_t>(i) * K * N,
                 out.data() + static_cast<size_t>(i) * M * N, M, K, N);

    if (Tensor<T>::should_record({&a, &b})) {
        Tensor<T>::attach(out, {a, b}, [a, b, B, M, K, N](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            std::vector<T>* da = ctx.grad(0);
            std::vector<T>* db = ctx.grad(1);
            std::vector<T> tmp(std::max(static_cast<size_t>(K) * N, static_cast<size_t>(M) * K));
            for (int i = 0; i < B; ++i) {
                const T* gi = g.data() + static_cast<size_t>(i) * M * N;
                if (da) {
                    transpose(b.data() + static_cast<size_t>(i) * K * N, tmp.data(), K, N);  // [N,K]
                    gemm_acc(gi, tmp.data(), da->data() + static_cast<size_t>(i) * M * K, M, N, K);
                }
                if (db) {
                    transpose(a.data() + static_cast<size_t>(i) * M * K, tmp.data(), M, K);  // [K,M]
                    gemm_acc(tmp.data(), gi, db->data() + static_cast<size_t>(i) * K * N, K, M, N);
                }
            }
        });
    }
    return out;
}

// Swap the last two axes of a rank >= 2 tensor.
template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& x) {
    if (x.rank() < 2) throw DimensionError("transpose_last2: need rank >= 2");
    Shape s = x.shape();
    const int M = s[s.size() - 2], N = s[s.size() - 1];
    std::swap(s[s.size() - 2], s[s.size() - 1]);
    size_t batch = x.numel() / (static_cast<size_t>(M) * N);
    Tensor<T> out = Tensor<T>::zeros(s);
    for (size_t i = 0; i < batch; ++i)
        transpose(x.data() + i * M * N, out.data() + i * M * N, M, N);
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [batch, M, N](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0)) {
                std::vector<T> tmp(static_cast<size_t>(M) * N);
                for (size_t i = 0; i < batch; ++i) {
                    transpose(g.data() + i * M * N, tmp.data(), N, M);
                    T* d = dx->data() + i * M * N;
                    for (size_t j = 0; j < tmp.size(); ++j) d[j] += tmp[j];
                }
            }
        });
    }
    return out;
}

// Numerically stabilized softmax over the last axis.
template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
    if (x.rank() < 1) throw DimensionError("softmax_lastdim: need rank >= 1");
    const int L = x.dim(x.rank() - 1);
    if (L < 1) throw DimensionError("softmax_lastdim: last axis must be >= 1");
    const size_t rows = x.numel() / static_cast<size_t>(L);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (size_t r = 0; r < rows; ++r) {
        const T* xi = x.data() + r * L;
        T* yi = out.data() + r * L;
        T m = xi[0];
        for (int i = 1; i < L; ++i) m = std::max(m, xi[i]);
        T s = T(0);
        for (int i = 0; i < L; ++i) {
            yi[i] = std::exp(xi[i] - m);
            s += yi[i];
        }
        T inv = T(1) / s;
        for (int i = 0; i < L; ++i) yi[i] *= inv;
    }
    if (Tensor<T>::should_record({&x})) {
        const std::vector<T>* y = &out.values();
        Tensor<T>::attach(out, {x}, [y, rows, L](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0)) {
                for (size_t r = 0; r < rows; ++r) {
                    const T* yi = y->data() + r * L;
                    const T* gi = g.data() + r * L;
                    T dot = T(0);
                    for (int i = 0; i < L; ++i) dot += gi[i] * yi[i];
                    T* d = dx->data() + r * L;
                    for (int i = 0; i < L; ++i) d[i] += yi[i] * (gi[i] - dot);
                }
            }
        });
    }
    return out;
}

// -------------------------------------------------------------------------
// elementwise suite
// -------------------------------------------------------------------------

namespace detail {

template <typename T, typename FwdFn, typename BackFn>
Tensor<T> binary_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* name, FwdFn fwd,
                            BackFn back) {
    check_same_shape(a, b, name);
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    const size_t n = a.numel();
    for (size_t i = 0; i < n; ++i) out.data()[i] = fwd(a.data()[i], b.data()[i]);
    if (Tensor<T>::should_record({&a, &b})) Tensor<T>::attach(out, {a, b}, back);
    return out;
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_same_shape(
        a, b, "add", [](T x, T y) { return x + y; },
        [n = a.numel()](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* da = ctx.grad(0))
                for (size_t i = 0; i < n; ++i) (*da)[i] += g[i];
            if (auto* db = ctx.grad(1))
                for (size_t i = 0; i < n; ++i) (*db)[i] += g[i];
        });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_same_shape(
        a, b, "sub", [](T x, T y) { return x - y; },
        [n = a.numel()](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* da = ctx.grad(0))
                for (size_t i = 0; i < n; ++i) (*da)[i] += g[i];
            if (auto* db = ctx.grad(1))
                for (size_t i = 0; i < n; ++i) (*db)[i] -= g[i];
        });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_same_shape(
        a, b, "mul", [](T x, T y) { return x * y; },
        [a, b](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            const size_t n = g.size();
            if (auto* da = ctx.grad(0))
                for (size_t i = 0; i < n; ++i) (*da)[i] += g[i] * b.data()[i];
            if (auto* db = ctx.grad(1))
                for (size_t i = 0; i < n; ++i) (*db)[i] += g[i] * a.data()[i];
        });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_same_shape(
        a, b, "div", [](T x, T y) { return x / y; },
        [a, b](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            const size_t n = g.size();
            if (auto* da = ctx.grad(0))
                for (size_t i = 0; i < n; ++i) (*da)[i] += g[i] / b.data()[i];
            if (auto* db = ctx.grad(1))
                for (size_t i = 0; i < n; ++i) {
                    T bi = b.data()[i];
                    (*db)[i] -= g[i] * a.data()[i] / (bi * bi);
                }
        });
}

namespace detail {

// channel axis: dim 0 for [C,H,W], dim 1 for [N,C,H,W]
template <typename T>
void channel_geometry(const Tensor<T>& x, const Tensor<T>& v, const char* op, size_t& batch, int& C,
                      size_t& inner) {
    if (v.rank() != 1)
        throw DimensionError(strfmt("%s: broadcast operand must be rank-1, got %s", op,
                                    shape_str(v.shape()).c_str()));
    if (x.rank() == 3) {
        batch = 1;
        C = x.dim(0);
        inner = static_cast<size_t>(x.dim(1)) * x.dim(2);
    } else if (x.rank() == 4) {
        batch = static_cast<size_t>(x.dim(0));
        C = x.dim(1);
        inner = static_cast<size_t>(x.dim(2)) * x.dim(3);
    } else {
        throw DimensionError(strfmt("%s: broadcast only over the channel axis of a rank-3/4 tensor, got %s",
                                    op, shape_str(x.shape()).c_str()));
    }
    if (v.dim(0) != C)
        throw DimensionError(strfmt("%s: channel axis = %d but operand has %d entries", op, C, v.dim(0)));
}

}  // namespace detail

template <typename T>
Tensor<T> add_channel(const Tensor<T>& x, const Tensor<T>& bias) {
    size_t batch, inner;
    int C;
    detail::channel_geometry(x, bias, "add_channel", batch, C, inner);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (size_t n = 0; n < batch; ++n)
        for (int c = 0; c < C; ++c) {
            const size_t off = (n * C + c) * inner;
            const T bc = bias.data()[c];
            for (size_t i = 0; i < inner; ++i) out.data()[off + i] = x.data()[off + i] + bc;
        }
    if (Tensor<T>::should_record({&x, &bias})) {
        Tensor<T>::attach(out, {x, bias}, [batch, C, inner](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0))
                for (size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i];
            if (auto* db = ctx.grad(1))
                for (size_t n = 0; n < batch; ++n)
                    for (int c = 0; c < C; ++c) {
                        const size_t off = (n * C + c) * inner;
                        T acc = T(0);
                        for (size_t i = 0; i < inner; ++i) acc += g[off + i];
                        (*db)[static_cast<size_t>(c)] += acc;
                    }
        });
    }
    return out;
}

template <typename T>
Tensor<T> mul_channel(const Tensor<T>& x, const Tensor<T>& s) {
    size_t batch, inner;
    int C;
    detail::channel_geometry(x, s, "mul_channel", batch, C, inner);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (size_t n = 0; n < batch; ++n)
        for (int c = 0; c < C; ++c) {
            const size_t off = (n * C + c) * inner;
            const T sc = s.data()[c];
            for (size_t i = 0; i < inner; ++i) out.data()[off + i] = x.data()[off + i] * sc;
        }
    if (Tensor<T>::should_record({&x, &s})) {
        Tensor<T>::attach(out, {x, s},
                          [x, s, batch, C, inner](const std::vector<T>& g, BackwardCtx<T>& ctx) {
                              if (auto* dx = ctx.grad(0))
                                  for (size_t n = 0; n < batch; ++n)
                                      for (int c = 0; c < C; ++c) {
                                          const size_t off = (n * C + c) * inner;
                                          const T sc = s.data()[c];
                                          for (size_t i = 0; i < inner; ++i) (*dx)[off + i] += g[off + i] * sc;
                                      }
                              if (auto* ds = ctx.grad(1))
                                  for (size_t n = 0; n < batch; ++n)
                                      for (int c = 0; c < C; ++c) {
                                          const size_t off = (n * C + c) * inner;
                                          T acc = T(0);
                                          for (size_t i = 0; i < inner; ++i)
                                              acc += g[off + i] * x.data()[off + i];
                                          (*ds)[static_cast<size_t>(c)] += acc;
                                      }
                          });
    }
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (size_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] * c;
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [c](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0))
                for (size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i] * c;
        });
    }
    return out;
}

template <typename T>
Tensor<T> shift(const Tensor<T>& x, T c) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (size_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] + c;
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0))
                for (size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (size_t i = 0; i < x.numel(); ++i) out.data()[i] = std::tanh(x.data()[i]);
    if (Tensor<T>::should_record({&x})) {
        const std::vector<T>* y = &out.values();
        Tensor<T>::attach(out, {x}, [y](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0))
                for (size_t i = 0; i < g.size(); ++i) {
                    T yi = (*y)[i];
                    (*dx)[i] += g[i] * (T(1) - yi * yi);
                }
        });
    }
    return out;
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (size_t i = 0; i < x.numel(); ++i) out.data()[i] = std::exp(x.data()[i]);
    if (Tensor<T>::should_record({&x})) {
        const std::vector<T>* y = &out.values();
        Tensor<T>::attach(out, {x}, [y](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0))
                for (size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i] * (*y)[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (size_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] * x.data()[i];
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [x](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0))
                for (size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i] * T(2) * x.data()[i];
        });
    }
    return out;
}

// Gradient passes inside [lo,hi] (boundary included) and is zero outside.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
    if (!(lo <= hi)) throw ConfigError("clamp: lo must be <= hi");
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (size_t i = 0; i < x.numel(); ++i) out.data()[i] = std::min(std::max(x.data()[i], lo), hi);
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [x, lo, hi](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0))
                for (size_t i = 0; i < g.size(); ++i) {
                    T xi = x.data()[i];
                    if (xi >= lo && xi <= hi) (*dx)[i] += g[i];
                }
        });
    }
    return out;
}

// -------------------------------------------------------------------------
// reductions / shape ops
// -------------------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T acc = T(0);
    for (size_t i = 0; i < x.numel(); ++i) acc += x.data()[i];
    Tensor<T> out = Tensor<T>::scalar(acc);
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0))
                for (size_t i = 0; i < dx->size(); ++i) (*dx)[i] += g[0];
        });
    }
    return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    const T inv = T(1) / static_cast<T>(x.numel());
    T acc = T(0);
    for (size_t i = 0; i < x.numel(); ++i) acc += x.data()[i];
    Tensor<T> out = Tensor<T>::scalar(acc * inv);
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [inv](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0))
                for (size_t i = 0; i < dx->size(); ++i) (*dx)[i] += g[0] * inv;
        });
    }
    return out;
}

// Reduce every axis except the first: [N, ...] -> [N].
template <typename T>
Tensor<T> sum_per_sample(const Tensor<T>& x) {
    if (x.rank() < 1) throw DimensionError("sum_per_sample: need rank >= 1");
    const int N = x.dim(0);
    const size_t inner = x.numel() / static_cast<size_t>(N);
    Tensor<T> out = Tensor<T>::zeros({N});
    for (int n = 0; n < N; ++n) {
        const T* xi = x.data() + static_cast<size_t>(n) * inner;
        T acc = T(0);
        for (size_t i = 0; i < inner; ++i) acc += xi[i];
        out.data()[n] = acc;
    }
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [N, inner](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0))
                for (int n = 0; n < N; ++n) {
                    T* d = dx->data() + static_cast<size_t>(n) * inner;
                    for (size_t i = 0; i < inner; ++i) d[i] += g[static_cast<size_t>(n)];
                }
        });
    }
    return out;
}

// Same buffer, new shape; never reorders elements.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw DimensionError(strfmt("reshape: %s has %zu elements, target %s has %zu",
                                    shape_str(x.shape()).c_str(), x.numel(), shape_str(shape).c_str(),
                                    shape_numel(shape)));
    Tensor<T> out = Tensor<T>::from_data(std::move(shape), x.values());
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0))
                for (size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i];
        });
    }
    return out;
}

// Select sample n, keeping the leading axis: [N,...] -> [1,...].
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& x, int n) {
    if (x.rank() < 1) throw DimensionError("slice_batch: need rank >= 1");
    const int N = x.dim(0);
    if (n < 0 || n >= N) throw DimensionError(strfmt("slice_batch: index %d out of [0,%d)", n, N));
    const size_t inner = x.numel() / static_cast<size_t>(N);
    Shape s = x.shape();
    s[0] = 1;
    std::vector<T> buf(x.data() + static_cast<size_t>(n) * inner,
                       x.data() + static_cast<size_t>(n + 1) * inner);
    Tensor<T> out = Tensor<T>::from_data(std::move(s), std::move(buf));
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [n, inner](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0)) {
                T* d = dx->data() + static_cast<size_t>(n) * inner;
                for (size_t i = 0; i < inner; ++i) d[i] += g[i];
            }
        });
    }
    return out;
}

// Select channels [c0,c1) of a rank-4 tensor.
template <typename T>
Tensor<T> channel_slice(const Tensor<T>& x, int c0, int c1) {
    detail::check_rank(x, 4, "channel_slice");
    const int N = x.dim(0), C = x.dim(1);
    const size_t inner = static_cast<size_t>(x.dim(2)) * x.dim(3);
    if (c0 < 0 || c1 > C || c0 >= c1)
        throw DimensionError(strfmt("channel_slice: range [%d,%d) invalid for C=%d", c0, c1, C));
    const int Cs = c1 - c0;
    Tensor<T> out = Tensor<T>::zeros({N, Cs, x.dim(2), x.dim(3)});
    for (int n = 0; n < N; ++n)
        std::copy(x.data() + (static_cast<size_t>(n) * C + c0) * inner,
                  x.data() + (static_cast<size_t>(n) * C + c1) * inner,
                  out.data() + static_cast<size_t>(n) * Cs * inner);
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [N, C, Cs, c0, inner](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0))
                for (int n = 0; n < N; ++n) {
                    const T* gi = g.data() + static_cast<size_t>(n) * Cs * inner;
                    T* d = dx->data() + (static_cast<size_t>(n) * C + c0) * inner;
                    for (size_t i = 0; i < static_cast<size_t>(Cs) * inner; ++i) d[i] += gi[i];
                }
        });
    }
    return out;
}

namespace detail {

// out[n][(c*b+dy)*b+dx][Y][X] = x[n][c][Y*b+dy][X*b+dx]; fwd=false inverts.
template <typename T>
void s2d_copy(const T* src, T* dst, int N, int C, int Hc, int Wc, int b, bool fwd) {
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int dy = 0; dy < b; ++dy)
                for (int dx = 0; dx < b; ++dx) {
                    const size_t zc = (static_cast<size_t>(n) * C * b * b) +
                                      (static_cast<size_t>(c) * b + dy) * b + dx;
                    for (int Y = 0; Y < Hc; ++Y)
                        for (int X = 0; X < Wc; ++X) {
                            size_t zi = (zc * Hc + Y) * Wc + X;
                            size_t xi = ((static_cast<size_t>(n) * C + c) * (Hc * b) + (Y * b + dy)) *
                                            (Wc * b) +
                                        (X * b + dx);
                            if (fwd)
                                dst[zi] = src[xi];
                            else
                                dst[xi] = src[zi];
                        }
                }
}

}  // namespace detail

// Exact, invertible rearrangement of b x b patches into channels.
template <typename T>
Tensor<T> space_to_depth(const Tensor<T>& x, int block) {
    detail::check_rank(x, 4, "space_to_depth");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (block < 1 || H % block != 0 || W % block != 0)
        throw ConfigError(strfmt("space_to_depth: spatial dims %dx%d not divisible by block %d", H, W, block));
    const int Hc = H / block, Wc = W / block;
    Tensor<T> out = Tensor<T>::zeros({N, C * block * block, Hc, Wc});
    detail::s2d_copy(x.data(), out.data(), N, C, Hc, Wc, block, true);
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [N, C, Hc, Wc, block](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0)) {
                std::vector<T> tmp(g.size(), T(0));
                detail::s2d_copy(g.data(), tmp.data(), N, C, Hc, Wc, block, false);
                for (size_t i = 0; i < tmp.size(); ++i) (*dx)[i] += tmp[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> depth_to_space(const Tensor<T>& x, int block) {
    detail::check_rank(x, 4, "depth_to_space");
    const int N = x.dim(0), Cz = x.dim(1), Hc = x.dim(2), Wc = x.dim(3);
    if (block < 1 || Cz % (block * block) != 0)
        throw DimensionError(strfmt("depth_to_space: channels %d not divisible by block^2 = %d", Cz,
                                    block * block));
    const int C = Cz / (block * block);
    Tensor<T> out = Tensor<T>::zeros({N, C, Hc * block, Wc * block});
    detail::s2d_copy(x.data(), out.data(), N, C, Hc, Wc, block, false);
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [N, C, Hc, Wc, block](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0)) {
                std::vector<T> tmp(g.size(), T(0));
                detail::s2d_copy(g.data(), tmp.data(), N, C, Hc, Wc, block, true);
                for (size_t i = 0; i < tmp.size(); ++i) (*dx)[i] += tmp[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
    detail::check_rank(x, 4, "upsample_nearest2x");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor<T> out = Tensor<T>::zeros({N, C, 2 * H, 2 * W});
    for (int nc = 0; nc < N * C; ++nc) {
        const T* xi = x.data() + static_cast<size_t>(nc) * H * W;
        T* yi = out.data() + static_cast<size_t>(nc) * 4 * H * W;
        for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) {
                T v = xi[static_cast<size_t>(y) * W + xx];
                T* base = yi + (static_cast<size_t>(2 * y) * 2 * W) + 2 * xx;
                base[0] = v;
                base[1] = v;
                base[2 * W] = v;
                base[2 * W + 1] = v;
            }
    }
    if (Tensor<T>::should_record({&x})) {
        Tensor<T>::attach(out, {x}, [N, C, H, W](const std::vector<T>& g, BackwardCtx<T>& ctx) {
            if (auto* dx = ctx.grad(0))
                for (int nc = 0; nc < N * C; ++nc) {
                    const T* gi = g.data() + static_cast<size_t>(nc) * 4 * H * W;
                    T* d = dx->data() + static_cast<size_t>(nc) * H * W;
                    for (int y = 0; y < H; ++y)
                        for (int xx = 0; xx < W; ++xx) {
                            const T* base = gi + (static_cast<size_t>(2 * y) * 2 * W) + 2 * xx;
                            d[static_cast<size_t>(y) * W + xx] +=
                                base[0] + base[1] + base[2 * W] + base[2 * W + 1];
                        }
                }
        });
    }
    return out;
}

}  // namespace gms
