#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "searchlab/util.hpp"

namespace searchlab {

struct StatReport {
    std::string test;
    double statistic = 0.0;
    double raw_p = 1.0;
    std::optional<double> adjusted_p;
    std::optional<double> effect_size;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    int n_a = 0;
    int n_b = 0;
    std::string family;
};

// Mixed-type description of one search outcome, used for Gower distances and
// the clustering permutation test. All vectors being compared must share the
// same field schema (same lengths, same field meanings position-by-position).
struct FeatureVector {
    std::vector<double> numeric;
    std::vector<std::string> categorical;
    std::string label;  // e.g. the track the run came from
};

// --- special functions (exposed for testing) ---

// Regularized incomplete beta function I_x(a, b), continued-fraction form.
double incomplete_beta(double a, double b, double x);
// Two-sided tail probability of Student's t distribution.
double student_t_two_sided(double t, double df);
// Standard normal CDF.
double normal_cdf(double z);
// log C(n, k)
double log_choose(std::int64_t n, std::int64_t k);

// --- tests ---

// Percentile bootstrap of mean(a) - mean(b). Resample r draws its randomness
// from derive_seed(seed, r).
StatReport bootstrap_ci(const std::vector<double>& a, const std::vector<double>& b, int resamples,
                        std::uint64_t seed);

StatReport welch_t(const std::vector<double>& a, const std::vector<double>& b);

// Midrank-tied U statistic for group a. Exact enumeration when
// |a|*|b| <= 400 and the combined sample is tie-free; otherwise normal
// approximation with tie correction and continuity correction.
StatReport mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);

// Two-sided Fisher exact test on [[a, b], [c, d]], margins fixed.
StatReport fisher_exact(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d);

// Average-variance form: (mean(a) - mean(b)) / sqrt((var_a + var_b) / 2).
double cohens_d(const std::vector<double>& a, const std::vector<double>& b);

// Pearson correlation of midranks; p from the t approximation with n-2 df.
StatReport spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

// Holm-Bonferroni step-down adjustment; output aligned with the input order.
std::vector<double> holm_bonferroni(const std::vector<double>& raw_ps);

// Exact upper tail P(X >= k) for X ~ Binomial(n, p0).
double binomial_tail(std::int64_t k, std::int64_t n, double p0);

// Symmetric Gower distance matrix. Numeric features are scaled by their range
// over the supplied set (zero-range features are dropped); categorical
// features contribute 0/1 mismatch.
Matrix gower_matrix(const std::vector<FeatureVector>& vectors);

// Label-permutation test of cluster structure. Statistic is
// mean(cross-label distance) / mean(within-label distance); the p-value uses
// the add-one estimator. Permutation r derives its shuffle from
// derive_seed(seed, r).
StatReport permutation_cluster_test(const Matrix& distances, const std::vector<std::string>& labels,
                                    int n_perm, std::uint64_t seed);

// One row per report: test,family,statistic,raw_p,adjusted_p,effect_size,ci_low,ci_high,n_a,n_b
std::string stat_report_csv(const std::vector<StatReport>& reports);

}  // namespace searchlab
