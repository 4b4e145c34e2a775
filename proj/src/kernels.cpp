#include "searchlab/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace searchlab::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double sum_sq(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

void mul_ewise(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void matmul_nn(double* c, const double* a, const double* b, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, std::size_t(m) * n * sizeof(double));
    for (int i = 0; i < m; ++i) {
        const double* arow = a + std::size_t(i) * k;
        double* crow = c + std::size_t(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            double av = arow[kk];
            const double* brow = b + std::size_t(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt(double* c, const double* a, const double* b, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + std::size_t(i) * k;
        double* crow = c + std::size_t(i) * n;
        for (int j = 0; j < n; ++j) {
            double v = dot(arow, b + std::size_t(j) * k, std::size_t(k));
            crow[j] = accumulate ? crow[j] + v : v;
        }
    }
}

void matmul_tn(double* c, const double* a, const double* b, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::memset(c, 0, std::size_t(m) * n * sizeof(double));
    for (int kk = 0; kk < k; ++kk) {
        const double* arow = a + std::size_t(kk) * m;
        const double* brow = b + std::size_t(kk) * n;
        for (int i = 0; i < m; ++i) {
            double av = arow[i];
            double* crow = c + std::size_t(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace scalar

const Backend& scalar_backend() {
    static const Backend backend = {
        "scalar",
        scalar::dot,    scalar::axpy,      scalar::scale,
        scalar::sum_sq, scalar::mul_ewise, scalar::matmul_nn,
        scalar::matmul_nt, scalar::matmul_tn,
    };
    return backend;
}

std::vector<const Backend*> available_backends() {
    std::vector<const Backend*> v{&scalar_backend()};
    if (const Backend* b = avx2_backend()) v.push_back(b);
    return v;
}

namespace {

const Backend& select_backend() {
    const char* env = std::getenv("SEARCHLAB_KERNELS");
    if (env != nullptr && env[0] != '\0') {
        std::string want(env);
        if (want == "scalar") return scalar_backend();
        if (want == "avx2") {
            const Backend* b = avx2_backend();
            if (b == nullptr)
                throw std::runtime_error("SEARCHLAB_KERNELS=avx2 requested but AVX2+FMA is unavailable");
            return *b;
        }
        throw std::runtime_error("unknown SEARCHLAB_KERNELS value: " + want);
    }
    if (const Backend* b = avx2_backend()) return *b;
    return scalar_backend();
}

}  // namespace

const Backend& active() {
    static const Backend& backend = select_backend();
    return backend;
}

std::string active_name() { return active().name; }

}  // namespace searchlab::kernels
