#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

using searchlab::Matrix;

namespace oracle {

namespace {

// One-sided Jacobi: rotate column pairs of W until all columns are mutually
// orthogonal; the accumulated rotations form V and the column norms are the
// singular values.
struct JacobiResult {
    Matrix w;  // rows x cols, columns orthogonal: W = U * diag(sigma)
    Matrix v;  // cols x cols orthogonal
};

JacobiResult one_sided_jacobi(const Matrix& a) {
    JacobiResult r;
    r.w = a;
    r.v = Matrix(a.cols, a.cols);
    for (int i = 0; i < a.cols; ++i) r.v(i, i) = 1.0;

    const int m = a.rows, n = a.cols;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (int i = 0; i < m; ++i) {
                    double wp = r.w(i, p), wq = r.w(i, q);
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if (std::fabs(apq) <= 1e-15 * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                double tau = (aqq - app) / (2.0 * apq);
                double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                for (int i = 0; i < m; ++i) {
                    double wp = r.w(i, p), wq = r.w(i, q);
                    r.w(i, p) = c * wp - s * wq;
                    r.w(i, q) = s * wp + c * wq;
                }
                for (int i = 0; i < n; ++i) {
                    double vp = r.v(i, p), vq = r.v(i, q);
                    r.v(i, p) = c * vp - s * vq;
                    r.v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }
    return r;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

}  // namespace

std::vector<double> singular_values(const Matrix& a) {
    const Matrix& work = a;
    JacobiResult r = a.rows >= a.cols ? one_sided_jacobi(work) : one_sided_jacobi(transpose(work));
    int n = r.w.cols;
    std::vector<double> sv(std::size_t(n), 0.0);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < r.w.rows; ++i) s += r.w(i, j) * r.w(i, j);
        sv[std::size_t(j)] = std::sqrt(s);
    }
    std::sort(sv.begin(), sv.end(), std::greater<double>());
    return sv;
}

Matrix polar_factor(const Matrix& a) {
    if (a.rows < a.cols) return transpose(polar_factor(transpose(a)));
    JacobiResult r = one_sided_jacobi(a);
    const int m = a.rows, n = a.cols;
    Matrix u(m, n);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += r.w(i, j) * r.w(i, j);
        s = std::sqrt(s);
        if (s > 0.0)
            for (int i = 0; i < m; ++i) u(i, j) = r.w(i, j) / s;
    }
    Matrix p(m, n);  // U * V^T
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int kk = 0; kk < n; ++kk) acc += u(i, kk) * r.v(j, kk);
            p(i, j) = acc;
        }
    return p;
}

double mw_u_pair_count(const std::vector<double>& a, const std::vector<double>& b) {
    double u = 0.0;
    for (double x : a)
        for (double y : b) {
            if (x > y)
                u += 1.0;
            else if (x == y)
                u += 0.5;
        }
    return u;
}

double mw_exact_p_enumeration(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    const int n = int(pooled.size());
    const int na = int(a.size());
    double u_obs = mw_u_pair_count(a, b);

    long total = 0, le = 0, ge = 0;
    std::vector<int> pick(std::size_t(na), 0);
    for (int i = 0; i < na; ++i) pick[std::size_t(i)] = i;
    const double eps = 1e-9;
    while (true) {
        std::vector<double> ga, gb;
        std::vector<bool> in(std::size_t(n), false);
        for (int idx : pick) in[std::size_t(idx)] = true;
        for (int i = 0; i < n; ++i) (in[std::size_t(i)] ? ga : gb).push_back(pooled[std::size_t(i)]);
        double u = mw_u_pair_count(ga, gb);
        ++total;
        if (u <= u_obs + eps) ++le;
        if (u >= u_obs - eps) ++ge;

        // next combination
        int i = na - 1;
        while (i >= 0 && pick[std::size_t(i)] == i + n - na) --i;
        if (i < 0) break;
        ++pick[std::size_t(i)];
        for (int j = i + 1; j < na; ++j) pick[std::size_t(j)] = pick[std::size_t(j - 1)] + 1;
    }
    double p = 2.0 * double(std::min(le, ge)) / double(total);
    return std::min(1.0, p);
}

namespace {

// Exact binomial coefficients via Pascal's triangle; doubles hold them
// exactly well beyond the margins exercised here.
double pascal_choose(int n, int k) {
    static std::vector<std::vector<double>> tri = {{1.0}};
    while (int(tri.size()) <= n) {
        const auto& prev = tri.back();
        std::vector<double> row(prev.size() + 1, 1.0);
        for (std::size_t j = 1; j + 1 < row.size(); ++j) row[j] = prev[j - 1] + prev[j];
        tri.push_back(std::move(row));
    }
    if (k < 0 || k > n) return 0.0;
    return tri[std::size_t(n)][std::size_t(k)];
}

}  // namespace

double fisher_exact_enumeration(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
    const int r1 = int(a + b), r2 = int(c + d), c1 = int(a + c);
    const int n = r1 + r2;
    double denom = pascal_choose(n, c1);
    auto pmf = [&](int x) { return pascal_choose(r1, x) * pascal_choose(r2, c1 - x) / denom; };
    double p_obs = pmf(int(a));
    int lo = std::max(0, c1 - r2), hi = std::min(r1, c1);
    double p = 0.0;
    for (int x = lo; x <= hi; ++x) {
        double px = pmf(x);
        if (px <= p_obs * (1.0 + 1e-7)) p += px;
    }
    return std::min(1.0, p);
}

double binomial_tail_sum(std::int64_t k, std::int64_t n, double p0) {
    long double p = 0.0L;
    for (std::int64_t x = k; x <= n; ++x) {
        long double term = (long double)pascal_choose(int(n), int(x));
        term *= powl((long double)p0, (long double)x);
        term *= powl(1.0L - (long double)p0, (long double)(n - x));
        p += term;
    }
    return double(p);
}

void matmul_nn_naive(double* c, const double* a, const double* b, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = acc ? c[std::size_t(i) * n + j] : 0.0;
            for (int kk = 0; kk < k; ++kk)
                s += a[std::size_t(i) * k + kk] * b[std::size_t(kk) * n + j];
            c[std::size_t(i) * n + j] = s;
        }
}

void matmul_nt_naive(double* c, const double* a, const double* b, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = acc ? c[std::size_t(i) * n + j] : 0.0;
            for (int kk = 0; kk < k; ++kk)
                s += a[std::size_t(i) * k + kk] * b[std::size_t(j) * k + kk];
            c[std::size_t(i) * n + j] = s;
        }
}

void matmul_tn_naive(double* c, const double* a, const double* b, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = acc ? c[std::size_t(i) * n + j] : 0.0;
            for (int kk = 0; kk < k; ++kk)
                s += a[std::size_t(kk) * m + i] * b[std::size_t(kk) * n + j];
            c[std::size_t(i) * n + j] = s;
        }
}

double fd_grad(const searchlab::ModelParams& params, const searchlab::Batch& batch,
               std::size_t idx, double h) {
    searchlab::ModelParams p = params;
    double orig = p.data[idx];
    p.data[idx] = orig + h;
    double up = searchlab::forward_loss(p, batch).mean_ce_nats();
    p.data[idx] = orig - h;
    double down = searchlab::forward_loss(p, batch).mean_ce_nats();
    return (up - down) / (2.0 * h);
}

}  // namespace oracle
