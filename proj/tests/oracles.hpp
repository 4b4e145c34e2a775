#pragma once

// Independent reference implementations ("oracles") used to cross-check the
// library. Each one deliberately takes a different algorithmic path than the
// code under test: Jacobi rotations instead of Newton-Schulz, brute-force
// enumeration instead of closed forms or DP, naive triple loops instead of
// tiled kernels.

#include <cstdint>
#include <vector>

#include "searchlab/model.hpp"
#include "searchlab/util.hpp"

namespace oracle {

// Singular values in descending order, via one-sided Jacobi on the columns.
std::vector<double> singular_values(const searchlab::Matrix& a);

// Polar factor U·V^T (the closest matrix with all singular values 1), same
// Jacobi decomposition.
searchlab::Matrix polar_factor(const searchlab::Matrix& a);

// Midrank Mann-Whitney U of group a, by direct pair counting.
double mw_u_pair_count(const std::vector<double>& a, const std::vector<double>& b);

// Exact two-sided Mann-Whitney p: enumerate every split of the pooled sample
// into groups of size |a|/|b|, p = 2*min(P(U <= u), P(U >= u)) capped at 1.
double mw_exact_p_enumeration(const std::vector<double>& a, const std::vector<double>& b);

// Two-sided Fisher exact p for [[a,b],[c,d]] via Pascal-triangle binomial
// coefficients (exact in double for the margins used in tests).
double fisher_exact_enumeration(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d);

// Upper binomial tail P(X >= k) by direct long-double summation.
double binomial_tail_sum(std::int64_t k, std::int64_t n, double p0);

// Naive row-major matmuls, the reference for kernel equivalence checks.
void matmul_nn_naive(double* c, const double* a, const double* b, int m, int k, int n, bool acc);
void matmul_nt_naive(double* c, const double* a, const double* b, int m, int k, int n, bool acc);
void matmul_tn_naive(double* c, const double* a, const double* b, int m, int k, int n, bool acc);

// Central-difference gradient of the mean cross-entropy (nats per scored
// target) with respect to parameter element `idx`.
double fd_grad(const searchlab::ModelParams& params, const searchlab::Batch& batch,
               std::size_t idx, double h);

}  // namespace oracle
