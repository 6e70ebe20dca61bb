#pragma once

#include <algorithm>
#include <cstddef>

namespace gms {

namespace detail {

// Register-tiled inner block. For every output element the k-accumulation
// runs in ascending order, so results are independent of the tiling and
// reproducible run to run.
template <typename T, int IB, int JB>
void gemm_block(const T* __restrict__ A, const T* __restrict__ B, T* __restrict__ C,
                int i0, int j0, int K, int lda, int ldb, int ldc) {
    T acc[IB][JB];
    for (int di = 0; di < IB; ++di)
        for (int dj = 0; dj < JB; ++dj) acc[di][dj] = C[static_cast<size_t>(i0 + di) * ldc + j0 + dj];
    for (int k = 0; k < K; ++k) {
        const T* __restrict__ brow = B + static_cast<size_t>(k) * ldb + j0;
        for (int di = 0; di < IB; ++di) {
            T a = A[static_cast<size_t>(i0 + di) * lda + k];
            for (int dj = 0; dj < JB; ++dj) acc[di][dj] += a * brow[dj];
        }
    }
    for (int di = 0; di < IB; ++di)
        for (int dj = 0; dj < JB; ++dj) C[static_cast<size_t>(i0 + di) * ldc + j0 + dj] = acc[di][dj];
}

}  // namespace detail

// C[M,N] += A[M,K] * B[K,N], all row-major and contiguous.
template <typename T>
void gemm_acc(const T* A, const T* B, T* C, int M, int K, int N) {
    constexpr int JB = 64;
    constexpr int IB = 4;
    int j0 = 0;
    for (; j0 + JB <= N; j0 += JB) {
        int i0 = 0;
        for (; i0 + IB <= M; i0 += IB) detail::gemm_block<T, IB, JB>(A, B, C, i0, j0, K, K, N, N);
        for (; i0 < M; ++i0) detail::gemm_block<T, 1, JB>(A, B, C, i0, j0, K, K, N, N);
    }
    if (j0 < N) {
        for (int i = 0; i < M; ++i) {
            const T* arow = A + static_cast<size_t>(i) * K;
            T* crow = C + static_cast<size_t>(i) * N;
            for (int k = 0; k < K; ++k) {
                T a = arow[k];
                const T* brow = B + static_cast<size_t>(k) * N;
                for (int j = j0; j < N; ++j) crow[j] += a * brow[j];
            }
        }
    }
}

// dst[N,M] = src[M,N]
template <typename T>
void transpose(const T* src, T* dst, int M, int N) {
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) dst[static_cast<size_t>(j) * M + i] = src[static_cast<size_t>(i) * N + j];
}

}  // namespace gms
