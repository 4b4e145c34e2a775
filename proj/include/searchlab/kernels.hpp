#pragma once

// Data-parallel inner loops used by the model and optimizer.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The backend is selected once at startup: the environment
// variable SEARCHLAB_KERNELS ("scalar" or "avx2") wins, otherwise the best
// supported variant is used. Within a process the selection is stable, so
// fixed-seed runs stay bitwise reproducible.
//
// Matrices are dense row-major doubles. m/k/n follow BLAS conventions.

#include <cstddef>
#include <string>
#include <vector>

namespace searchlab::kernels {

struct Backend {
    const char* name;

    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    void (*scale)(double alpha, double* x, std::size_t n);
    double (*sum_sq)(const double* x, std::size_t n);
    // out = a .* b
    void (*mul_ewise)(const double* a, const double* b, double* out, std::size_t n);

    // C[m,n] = A[m,k] * B[k,n]          (+= when accumulate)
    void (*matmul_nn)(double* c, const double* a, const double* b, int m, int k, int n, bool accumulate);
    // C[m,n] = A[m,k] * B[n,k]^T
    void (*matmul_nt)(double* c, const double* a, const double* b, int m, int k, int n, bool accumulate);
    // C[m,n] = A[k,m]^T * B[k,n]
    void (*matmul_tn)(double* c, const double* a, const double* b, int m, int k, int n, bool accumulate);
};

const Backend& scalar_backend();
// nullptr when the CPU (or build) lacks AVX2+FMA.
const Backend* avx2_backend();

// All backends usable on this machine; used by the equivalence tests.
std::vector<const Backend*> available_backends();

// The runtime-selected backend.
const Backend& active();
// Name of the active backend ("scalar" / "avx2"), for run manifests.
std::string active_name();

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy(alpha, x, y, n); }
inline void scale(double alpha, double* x, std::size_t n) { active().scale(alpha, x, n); }
inline double sum_sq(const double* x, std::size_t n) { return active().sum_sq(x, n); }
inline void mul_ewise(const double* a, const double* b, double* out, std::size_t n) { active().mul_ewise(a, b, out, n); }
inline void matmul_nn(double* c, const double* a, const double* b, int m, int k, int n, bool accumulate = false) {
    active().matmul_nn(c, a, b, m, k, n, accumulate);
}
inline void matmul_nt(double* c, const double* a, const double* b, int m, int k, int n, bool accumulate = false) {
    active().matmul_nt(c, a, b, m, k, n, accumulate);
}
inline void matmul_tn(double* c, const double* a, const double* b, int m, int k, int n, bool accumulate = false) {
    active().matmul_tn(c, a, b, m, k, n, accumulate);
}

}  // namespace searchlab::kernels
