#pragma once

#include <algorithm>
#include <cstdint>

namespace ngp::detail {

// Row-major kernels, all accumulating into C. Every output element is summed
// in ascending reduction-index order regardless of blocking, so results are
// bit-reproducible.

/// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void gemm_nn(std::int64_t M, std::int64_t N, std::int64_t K, const T* A, const T* B, T* C) {
    constexpr std::int64_t kBlockN = 512;
    for (std::int64_t j0 = 0; j0 < N; j0 += kBlockN) {
        const std::int64_t j1 = std::min(N, j0 + kBlockN);
        std::int64_t i = 0;
        for (; i + 4 <= M; i += 4) {
            T* __restrict c0 = C + (i + 0) * N;
            T* __restrict c1 = C + (i + 1) * N;
            T* __restrict c2 = C + (i + 2) * N;
            T* __restrict c3 = C + (i + 3) * N;
            for (std::int64_t k = 0; k < K; ++k) {
                const T a0 = A[(i + 0) * K + k];
                const T a1 = A[(i + 1) * K + k];
                const T a2 = A[(i + 2) * K + k];
                const T a3 = A[(i + 3) * K + k];
                const T* __restrict b = B + k * N;
                for (std::int64_t j = j0; j < j1; ++j) {
                    const T bv = b[j];
                    c0[j] += a0 * bv;
                    c1[j] += a1 * bv;
                    c2[j] += a2 * bv;
                    c3[j] += a3 * bv;
                }
            }
        }
        for (; i < M; ++i) {
            T* __restrict c = C + i * N;
            for (std::int64_t k = 0; k < K; ++k) {
                const T a = A[i * K + k];
                const T* __restrict b = B + k * N;
                for (std::int64_t j = j0; j < j1; ++j) c[j] += a * b[j];
            }
        }
    }
}

/// C[M,N] += A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(std::int64_t M, std::int64_t N, std::int64_t K, const T* A, const T* B, T* C) {
    constexpr std::int64_t kBlockN = 512;
    for (std::int64_t j0 = 0; j0 < N; j0 += kBlockN) {
        const std::int64_t j1 = std::min(N, j0 + kBlockN);
        std::int64_t i = 0;
        for (; i + 4 <= M; i += 4) {
            T* __restrict c0 = C + (i + 0) * N;
            T* __restrict c1 = C + (i + 1) * N;
            T* __restrict c2 = C + (i + 2) * N;
            T* __restrict c3 = C + (i + 3) * N;
            for (std::int64_t k = 0; k < K; ++k) {
                const T a0 = A[k * M + i + 0];
                const T a1 = A[k * M + i + 1];
                const T a2 = A[k * M + i + 2];
                const T a3 = A[k * M + i + 3];
                const T* __restrict b = B + k * N;
                for (std::int64_t j = j0; j < j1; ++j) {
                    const T bv = b[j];
                    c0[j] += a0 * bv;
                    c1[j] += a1 * bv;
                    c2[j] += a2 * bv;
                    c3[j] += a3 * bv;
                }
            }
        }
        for (; i < M; ++i) {
            T* __restrict c = C + i * N;
            for (std::int64_t k = 0; k < K; ++k) {
                const T a = A[k * M + i];
                const T* __restrict b = B + k * N;
                for (std::int64_t j = j0; j < j1; ++j) c[j] += a * b[j];
            }
        }
    }
}

/// Out[N,M] = In[M,N]^T
template <typename T>
void transpose(std::int64_t M, std::int64_t N, const T* in, T* out) {
    constexpr std::int64_t kTile = 32;
    for (std::int64_t i0 = 0; i0 < M; i0 += kTile) {
        for (std::int64_t j0 = 0; j0 < N; j0 += kTile) {
            const std::int64_t i1 = std::min(M, i0 + kTile);
            const std::int64_t j1 = std::min(N, j0 + kTile);
            for (std::int64_t i = i0; i < i1; ++i)
                for (std::int64_t j = j0; j < j1; ++j) out[j * M + i] = in[i * N + j];
        }
    }
}

/// C[M,N] += A[M,K] * B[N,K]^T, via a transposed copy of B.
template <typename T>
void gemm_nt(std::int64_t M, std::int64_t N, std::int64_t K, const T* A, const T* B, T* C, T* scratch_KN) {
    transpose(N, K, B, scratch_KN);
    gemm_nn(M, N, K, A, scratch_KN, C);
}

} // namespace ngp::detail
