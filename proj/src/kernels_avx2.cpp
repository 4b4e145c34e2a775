// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma on x86-64 and guarded
// behind a runtime CPU check, so the binary stays runnable on older machines.

#include "searchlab/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define SEARCHLAB_X86 1
#include <immintrin.h>
#else
#define SEARCHLAB_X86 0
#endif

#include <cstring>

namespace searchlab::kernels {

#if SEARCHLAB_X86

namespace avx2 {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

double sum_sq(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        acc0 = _mm256_fmadd_pd(v, v, acc0);
    }
    double acc = hsum(acc0);
    for (; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

void mul_ewise(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

// Register-tiled GEMMs. A 4-row by 8-column block of C lives in eight ymm
// accumulators while the kernel streams the shared operand, so each C element
// is loaded/stored once per call instead of once per k-step, and loop
// overhead is amortized over 8 FMAs per k-step.

// Shared 4x8 broadcast micro-kernel: C block += sum_k bcast(a_r(kk)) * B[kk].
// `a_at(kk, r)` supplies the A element multiplying B row kk into C row r.
template <typename AAt>
inline void tile4x8(double* c0, double* c1, double* c2, double* c3, const double* b, int k, int n,
                    int j0, AAt a_at) {
    __m256d acc00 = _mm256_loadu_pd(c0 + j0), acc01 = _mm256_loadu_pd(c0 + j0 + 4);
    __m256d acc10 = _mm256_loadu_pd(c1 + j0), acc11 = _mm256_loadu_pd(c1 + j0 + 4);
    __m256d acc20 = _mm256_loadu_pd(c2 + j0), acc21 = _mm256_loadu_pd(c2 + j0 + 4);
    __m256d acc30 = _mm256_loadu_pd(c3 + j0), acc31 = _mm256_loadu_pd(c3 + j0 + 4);
    for (int kk = 0; kk < k; ++kk) {
        const double* brow = b + std::size_t(kk) * n + j0;
        __m256d b0 = _mm256_loadu_pd(brow);
        __m256d b1 = _mm256_loadu_pd(brow + 4);
        __m256d va = _mm256_set1_pd(a_at(kk, 0));
        acc00 = _mm256_fmadd_pd(va, b0, acc00);
        acc01 = _mm256_fmadd_pd(va, b1, acc01);
        va = _mm256_set1_pd(a_at(kk, 1));
        acc10 = _mm256_fmadd_pd(va, b0, acc10);
        acc11 = _mm256_fmadd_pd(va, b1, acc11);
        va = _mm256_set1_pd(a_at(kk, 2));
        acc20 = _mm256_fmadd_pd(va, b0, acc20);
        acc21 = _mm256_fmadd_pd(va, b1, acc21);
        va = _mm256_set1_pd(a_at(kk, 3));
        acc30 = _mm256_fmadd_pd(va, b0, acc30);
        acc31 = _mm256_fmadd_pd(va, b1, acc31);
    }
    _mm256_storeu_pd(c0 + j0, acc00);
    _mm256_storeu_pd(c0 + j0 + 4, acc01);
    _mm256_storeu_pd(c1 + j0, acc10);
    _mm256_storeu_pd(c1 + j0 + 4, acc11);
    _mm256_storeu_pd(c2 + j0, acc20);
    _mm256_storeu_pd(c2 + j0 + 4, acc21);
    _mm256_storeu_pd(c3 + j0, acc30);
    _mm256_storeu_pd(c3 + j0 + 4, acc31);
}

void matmul_nn(double* c, const double* a, const double* b, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, std::size_t(m) * n * sizeof(double));
    int i0 = 0;
    for (; i0 + 4 <= m; i0 += 4) {
        const double* a0 = a + std::size_t(i0) * k;
        const double* a1 = a0 + k;
        const double* a2 = a1 + k;
        const double* a3 = a2 + k;
        double* c0 = c + std::size_t(i0) * n;
        double* c1 = c0 + n;
        double* c2 = c1 + n;
        double* c3 = c2 + n;
        const double* arows[4] = {a0, a1, a2, a3};
        int j0 = 0;
        for (; j0 + 8 <= n; j0 += 8)
            tile4x8(c0, c1, c2, c3, b, k, n, j0,
                    [&](int kk, int r) { return arows[r][kk]; });
        for (; j0 < n; ++j0) {
            double s0 = c0[j0], s1 = c1[j0], s2 = c2[j0], s3 = c3[j0];
            for (int kk = 0; kk < k; ++kk) {
                double bv = b[std::size_t(kk) * n + j0];
                s0 += a0[kk] * bv;
                s1 += a1[kk] * bv;
                s2 += a2[kk] * bv;
                s3 += a3[kk] * bv;
            }
            c0[j0] = s0;
            c1[j0] = s1;
            c2[j0] = s2;
            c3[j0] = s3;
        }
    }
    for (; i0 < m; ++i0) {
        const double* arow = a + std::size_t(i0) * k;
        double* crow = c + std::size_t(i0) * n;
        for (int kk = 0; kk < k; ++kk)
            axpy(arow[kk], b + std::size_t(kk) * n, crow, std::size_t(n));
    }
}

void matmul_nt(double* c, const double* a, const double* b, int m, int k, int n, bool accumulate) {
    // Dot-product formulation; 2x4 tile keeps 8 accumulators plus 6 operand
    // registers within the 16 ymm registers.
    int i0 = 0;
    for (; i0 + 2 <= m; i0 += 2) {
        const double* a0 = a + std::size_t(i0) * k;
        const double* a1 = a0 + k;
        double* c0 = c + std::size_t(i0) * n;
        double* c1 = c0 + n;
        int j0 = 0;
        for (; j0 + 4 <= n; j0 += 4) {
            const double* b0 = b + std::size_t(j0) * k;
            const double* b1 = b0 + k;
            const double* b2 = b1 + k;
            const double* b3 = b2 + k;
            __m256d acc00 = _mm256_setzero_pd(), acc01 = _mm256_setzero_pd();
            __m256d acc02 = _mm256_setzero_pd(), acc03 = _mm256_setzero_pd();
            __m256d acc10 = _mm256_setzero_pd(), acc11 = _mm256_setzero_pd();
            __m256d acc12 = _mm256_setzero_pd(), acc13 = _mm256_setzero_pd();
            int kk = 0;
            for (; kk + 4 <= k; kk += 4) {
                __m256d va0 = _mm256_loadu_pd(a0 + kk);
                __m256d va1 = _mm256_loadu_pd(a1 + kk);
                __m256d vb = _mm256_loadu_pd(b0 + kk);
                acc00 = _mm256_fmadd_pd(va0, vb, acc00);
                acc10 = _mm256_fmadd_pd(va1, vb, acc10);
                vb = _mm256_loadu_pd(b1 + kk);
                acc01 = _mm256_fmadd_pd(va0, vb, acc01);
                acc11 = _mm256_fmadd_pd(va1, vb, acc11);
                vb = _mm256_loadu_pd(b2 + kk);
                acc02 = _mm256_fmadd_pd(va0, vb, acc02);
                acc12 = _mm256_fmadd_pd(va1, vb, acc12);
                vb = _mm256_loadu_pd(b3 + kk);
                acc03 = _mm256_fmadd_pd(va0, vb, acc03);
                acc13 = _mm256_fmadd_pd(va1, vb, acc13);
            }
            double v00 = hsum(acc00), v01 = hsum(acc01), v02 = hsum(acc02), v03 = hsum(acc03);
            double v10 = hsum(acc10), v11 = hsum(acc11), v12 = hsum(acc12), v13 = hsum(acc13);
            for (; kk < k; ++kk) {
                double e0 = a0[kk], e1 = a1[kk];
                v00 += e0 * b0[kk];
                v01 += e0 * b1[kk];
                v02 += e0 * b2[kk];
                v03 += e0 * b3[kk];
                v10 += e1 * b0[kk];
                v11 += e1 * b1[kk];
                v12 += e1 * b2[kk];
                v13 += e1 * b3[kk];
            }
            if (accumulate) {
                c0[j0] += v00;
                c0[j0 + 1] += v01;
                c0[j0 + 2] += v02;
                c0[j0 + 3] += v03;
                c1[j0] += v10;
                c1[j0 + 1] += v11;
                c1[j0 + 2] += v12;
                c1[j0 + 3] += v13;
            } else {
                c0[j0] = v00;
                c0[j0 + 1] = v01;
                c0[j0 + 2] = v02;
                c0[j0 + 3] = v03;
                c1[j0] = v10;
                c1[j0 + 1] = v11;
                c1[j0 + 2] = v12;
                c1[j0 + 3] = v13;
            }
        }
        for (; j0 < n; ++j0) {
            const double* brow = b + std::size_t(j0) * k;
            double v0 = dot(a0, brow, std::size_t(k));
            double v1 = dot(a1, brow, std::size_t(k));
            if (accumulate) {
                c0[j0] += v0;
                c1[j0] += v1;
            } else {
                c0[j0] = v0;
                c1[j0] = v1;
            }
        }
    }
    for (; i0 < m; ++i0) {
        const double* arow = a + std::size_t(i0) * k;
        double* crow = c + std::size_t(i0) * n;
        for (int j = 0; j < n; ++j) {
            double v = dot(arow, b + std::size_t(j) * k, std::size_t(k));
            crow[j] = accumulate ? crow[j] + v : v;
        }
    }
}

void matmul_tn(double* c, const double* a, const double* b, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, std::size_t(m) * n * sizeof(double));
    int i0 = 0;
    for (; i0 + 4 <= m; i0 += 4) {
        double* c0 = c + std::size_t(i0) * n;
        double* c1 = c0 + n;
        double* c2 = c1 + n;
        double* c3 = c2 + n;
        int j0 = 0;
        for (; j0 + 8 <= n; j0 += 8)
            tile4x8(c0, c1, c2, c3, b, k, n, j0,
                    [&](int kk, int r) { return a[std::size_t(kk) * m + i0 + r]; });
        for (; j0 < n; ++j0) {
            double s0 = c0[j0], s1 = c1[j0], s2 = c2[j0], s3 = c3[j0];
            for (int kk = 0; kk < k; ++kk) {
                const double* acol = a + std::size_t(kk) * m + i0;
                double bv = b[std::size_t(kk) * n + j0];
                s0 += acol[0] * bv;
                s1 += acol[1] * bv;
                s2 += acol[2] * bv;
                s3 += acol[3] * bv;
            }
            c0[j0] = s0;
            c1[j0] = s1;
            c2[j0] = s2;
            c3[j0] = s3;
        }
    }
    if (i0 < m) {
        for (int kk = 0; kk < k; ++kk) {
            const double* arow = a + std::size_t(kk) * m;
            const double* brow = b + std::size_t(kk) * n;
            for (int i = i0; i < m; ++i)
                axpy(arow[i], brow, c + std::size_t(i) * n, std::size_t(n));
        }
    }
}

}  // namespace avx2

const Backend* avx2_backend() {
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    if (!supported) return nullptr;
    static const Backend backend = {
        "avx2",
        avx2::dot,    avx2::axpy,      avx2::scale,
        avx2::sum_sq, avx2::mul_ewise, avx2::matmul_nn,
        avx2::matmul_nt, avx2::matmul_tn,
    };
    return &backend;
}

#else

const Backend* avx2_backend() { return nullptr; }

#endif

}  // namespace searchlab::kernels
