#include "searchlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace searchlab {

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

// Unbiased sample variance (n - 1 denominator).
double sample_var(const std::vector<double>& v) {
    double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / double(v.size() - 1);
}

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kTiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

// Midranks of the values in `pool` (1-based average ranks for ties).
std::vector<double> midranks(const std::vector<double>& pool) {
    std::size_t n = pool.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return pool[i] < pool[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pool[order[j + 1]] == pool[order[i]]) ++j;
        double avg = 0.5 * double(i + j) + 1.0;  // mean of 1-based ranks i+1..j+1
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw config_error("correlation undefined for a constant input vector");
    return sxy / std::sqrt(sxx * syy);
}

// Linear-interpolation percentile of a sorted vector, q in [0, 1].
double percentile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.size() == 1) return sorted[0];
    double pos = q * double(sorted.size() - 1);
    std::size_t lo = std::size_t(std::floor(pos));
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - double(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                   b * std::log1p(-x);
    double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
    return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    if (df <= 0.0) throw config_error("t distribution requires positive degrees of freedom");
    double p = incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    return std::min(1.0, std::max(0.0, p));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double log_choose(std::int64_t n, std::int64_t k) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
           std::lgamma(double(n - k) + 1.0);
}

StatReport bootstrap_ci(const std::vector<double>& a, const std::vector<double>& b, int resamples,
                        std::uint64_t seed) {
    if (a.empty() || b.empty()) throw config_error("bootstrap requires non-empty groups");
    if (resamples < 1) throw config_error("bootstrap requires at least one resample");
    std::vector<double> stats(std::size_t(resamples), 0.0);
    for (int r = 0; r < resamples; ++r) {
        Rng rng(derive_seed(seed, std::uint64_t(r)));
        double sa = 0.0, sb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            sa += a[rng.uniform_int(std::uint64_t(0), std::uint64_t(a.size() - 1))];
        for (std::size_t i = 0; i < b.size(); ++i)
            sb += b[rng.uniform_int(std::uint64_t(0), std::uint64_t(b.size() - 1))];
        stats[std::size_t(r)] = sa / double(a.size()) - sb / double(b.size());
    }
    std::size_t n_le = 0, n_ge = 0;
    for (double s : stats) {
        if (s <= 0.0) ++n_le;
        if (s >= 0.0) ++n_ge;
    }
    std::sort(stats.begin(), stats.end());

    StatReport rep;
    rep.test = "bootstrap_mean_diff";
    rep.statistic = mean_of(a) - mean_of(b);
    rep.ci_low = percentile_sorted(stats, 0.025);
    rep.ci_high = percentile_sorted(stats, 0.975);
    double p = 2.0 * std::min(double(n_le), double(n_ge)) / double(resamples);
    rep.raw_p = std::min(1.0, std::max(1.0 / double(resamples), p));
    rep.n_a = int(a.size());
    rep.n_b = int(b.size());
    return rep;
}

StatReport welch_t(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2)
        throw config_error("welch_t requires at least two values per group");
    double na = double(a.size()), nb = double(b.size());
    double va = sample_var(a), vb = sample_var(b);
    double se2 = va / na + vb / nb;

    StatReport rep;
    rep.test = "welch_t";
    rep.n_a = int(a.size());
    rep.n_b = int(b.size());
    double diff = mean_of(a) - mean_of(b);
    if (se2 == 0.0) {
        // Both groups constant: equal means are trivially indistinct, unequal
        // means trivially distinct.
        rep.statistic = diff == 0.0 ? 0.0
                                    : std::copysign(std::numeric_limits<double>::infinity(), diff);
        rep.raw_p = diff == 0.0 ? 1.0 : 0.0;
        return rep;
    }
    rep.statistic = diff / std::sqrt(se2);
    double df = se2 * se2 /
                ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    rep.raw_p = student_t_two_sided(rep.statistic, df);
    return rep;
}

StatReport mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw config_error("mann_whitney_u requires non-empty groups");
    std::size_t na = a.size(), nb = b.size(), n = na + nb;
    std::vector<double> pool(a);
    pool.insert(pool.end(), b.begin(), b.end());
    std::vector<double> ranks = midranks(pool);
    double rank_sum_a = 0.0;
    for (std::size_t i = 0; i < na; ++i) rank_sum_a += ranks[i];
    double u = rank_sum_a - double(na) * double(na + 1) / 2.0;

    StatReport rep;
    rep.test = "mann_whitney_u";
    rep.statistic = u;
    rep.n_a = int(na);
    rep.n_b = int(nb);

    std::vector<double> sorted_pool(pool);
    std::sort(sorted_pool.begin(), sorted_pool.end());
    bool has_ties = std::adjacent_find(sorted_pool.begin(), sorted_pool.end()) !=
                    sorted_pool.end();

    if (!has_ties && na * nb <= 400) {
        // Exact null distribution of the a-group rank sum by subset-sum
        // counting: ways[k][s] = #(k-subsets of ranks 1..n with sum s).
        std::size_t max_sum = n * (n + 1) / 2;
        std::vector<std::vector<double>> ways(na + 1, std::vector<double>(max_sum + 1, 0.0));
        ways[0][0] = 1.0;
        for (std::size_t r = 1; r <= n; ++r)
            for (std::size_t k = std::min(r, na); k >= 1; --k)
                for (std::size_t s = max_sum; s >= r; --s)
                    if (ways[k - 1][s - r] > 0.0) ways[k][s] += ways[k - 1][s - r];
        double total = std::exp(log_choose(std::int64_t(n), std::int64_t(na)));
        std::int64_t obs = std::int64_t(std::llround(rank_sum_a));
        double le = 0.0, ge = 0.0;
        for (std::size_t s = 0; s <= max_sum; ++s) {
            if (std::int64_t(s) <= obs) le += ways[na][s];
            if (std::int64_t(s) >= obs) ge += ways[na][s];
        }
        rep.raw_p = std::min(1.0, 2.0 * std::min(le, ge) / total);
        return rep;
    }

    // Normal approximation with tie correction and continuity correction.
    double mean_u = double(na) * double(nb) / 2.0;
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && sorted_pool[j + 1] == sorted_pool[i]) ++j;
        double t = double(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    double var_u = double(na) * double(nb) / 12.0 *
                   (double(n + 1) - tie_term / (double(n) * double(n - 1)));
    if (var_u <= 0.0) {
        rep.raw_p = 1.0;  // every pooled value identical
        return rep;
    }
    double z = (std::max(0.0, std::fabs(u - mean_u) - 0.5)) / std::sqrt(var_u);
    rep.raw_p = std::min(1.0, 2.0 * (1.0 - normal_cdf(z)));
    return rep;
}

StatReport fisher_exact(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
    if (a < 0 || b < 0 || c < 0 || d < 0)
        throw config_error("fisher_exact requires nonnegative counts");
    std::int64_t n = a + b + c + d;
    if (n == 0) throw config_error("fisher_exact requires a non-empty table");
    std::int64_t row1 = a + b, col1 = a + c;
    auto log_prob = [&](std::int64_t x) {
        return log_choose(row1, x) + log_choose(n - row1, col1 - x) - log_choose(n, col1);
    };
    double obs = std::exp(log_prob(a));
    std::int64_t lo = std::max<std::int64_t>(0, col1 - (n - row1));
    std::int64_t hi = std::min(row1, col1);
    double p = 0.0;
    for (std::int64_t x = lo; x <= hi; ++x) {
        double px = std::exp(log_prob(x));
        if (px <= obs * (1.0 + 1e-7)) p += px;
    }
    StatReport rep;
    rep.test = "fisher_exact";
    rep.statistic = obs;
    rep.raw_p = std::min(1.0, p);
    rep.n_a = int(row1);
    rep.n_b = int(n - row1);
    return rep;
}

double cohens_d(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2)
        throw config_error("cohens_d requires at least two values per group");
    double va = sample_var(a), vb = sample_var(b);
    if (va == 0.0 && vb == 0.0) throw config_error("cohens_d undefined when both variances are zero");
    return (mean_of(a) - mean_of(b)) / std::sqrt((va + vb) / 2.0);
}

StatReport spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw config_error("spearman_rho requires equal-length inputs");
    if (x.size() < 3) throw config_error("spearman_rho requires at least three pairs");
    double rho = pearson(midranks(x), midranks(y));
    StatReport rep;
    rep.test = "spearman_rho";
    rep.statistic = rho;
    rep.n_a = int(x.size());
    rep.n_b = int(y.size());
    double n = double(x.size());
    if (std::fabs(rho) >= 1.0) {
        rep.raw_p = 0.0;
    } else {
        double t = rho * std::sqrt((n - 2.0) / (1.0 - rho * rho));
        rep.raw_p = student_t_two_sided(t, n - 2.0);
    }
    return rep;
}

std::vector<double> holm_bonferroni(const std::vector<double>& raw_ps) {
    std::size_t m = raw_ps.size();
    for (double p : raw_ps)
        if (!(p >= 0.0 && p <= 1.0)) throw config_error("holm_bonferroni requires p in [0, 1]");
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return raw_ps[i] < raw_ps[j]; });
    std::vector<double> adjusted(m);
    double running = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double adj = raw_ps[order[i]] * double(m - i);
        running = std::max(running, adj);
        adjusted[order[i]] = std::min(1.0, running);
    }
    return adjusted;
}

double binomial_tail(std::int64_t k, std::int64_t n, double p0) {
    if (k < 0 || n < 0 || k > n) throw config_error("binomial_tail requires 0 <= k <= n");
    if (!(p0 > 0.0 && p0 < 1.0)) throw config_error("binomial_tail requires p0 in (0, 1)");
    double p = 0.0;
    for (std::int64_t j = k; j <= n; ++j)
        p += std::exp(log_choose(n, j) + double(j) * std::log(p0) +
                      double(n - j) * std::log1p(-p0));
    return std::min(1.0, p);
}

Matrix gower_matrix(const std::vector<FeatureVector>& vectors) {
    if (vectors.size() < 2) throw config_error("gower_matrix requires at least two vectors");
    std::size_t n = vectors.size();
    std::size_t n_num = vectors[0].numeric.size();
    std::size_t n_cat = vectors[0].categorical.size();
    for (const FeatureVector& v : vectors)
        if (v.numeric.size() != n_num || v.categorical.size() != n_cat)
            throw config_error("gower_matrix requires identical feature schemas");

    // Ranges over the supplied set; zero-range numeric features are dropped.
    std::vector<double> range(n_num, 0.0);
    std::size_t included = n_cat;
    for (std::size_t f = 0; f < n_num; ++f) {
        double lo = vectors[0].numeric[f], hi = lo;
        for (const FeatureVector& v : vectors) {
            lo = std::min(lo, v.numeric[f]);
            hi = std::max(hi, v.numeric[f]);
        }
        range[f] = hi - lo;
        if (range[f] > 0.0) ++included;
    }
    if (included == 0) throw config_error("gower_matrix: every feature has zero range");

    Matrix dist(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double sum = 0.0;
            for (std::size_t f = 0; f < n_num; ++f)
                if (range[f] > 0.0)
                    sum += std::fabs(vectors[i].numeric[f] - vectors[j].numeric[f]) / range[f];
            for (std::size_t f = 0; f < n_cat; ++f)
                sum += vectors[i].categorical[f] == vectors[j].categorical[f] ? 0.0 : 1.0;
            double d = sum / double(included);
            dist(i, j) = d;
            dist(j, i) = d;
        }
    }
    return dist;
}

namespace {

double cross_within_ratio(const Matrix& d, const std::vector<std::string>& labels) {
    double cross = 0.0, within = 0.0;
    std::size_t n_cross = 0, n_within = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            if (labels[i] == labels[j]) {
                within += d(i, j);
                ++n_within;
            } else {
                cross += d(i, j);
                ++n_cross;
            }
        }
    }
    if (n_cross == 0 || n_within == 0)
        throw config_error("cluster test requires both within- and cross-label pairs");
    double mean_within = within / double(n_within);
    double mean_cross = cross / double(n_cross);
    if (mean_within == 0.0)
        return std::numeric_limits<double>::infinity();
    return mean_cross / mean_within;
}

}  // namespace

StatReport permutation_cluster_test(const Matrix& distances, const std::vector<std::string>& labels,
                                    int n_perm, std::uint64_t seed) {
    if (distances.rows != labels.size() || distances.cols != labels.size())
        throw config_error("distance matrix and label list disagree in size");
    std::map<std::string, int> counts;
    for (const std::string& l : labels) ++counts[l];
    if (counts.size() < 2) throw config_error("cluster test requires at least two labels");
    for (const auto& [label, count] : counts)
        if (count < 2)
            throw config_error("cluster test requires at least two members per label: " + label);
    if (n_perm < 1) throw config_error("cluster test requires at least one permutation");

    double observed = cross_within_ratio(distances, labels);
    int n_ge = 0;
    std::vector<std::string> perm(labels);
    for (int r = 0; r < n_perm; ++r) {
        Rng rng(derive_seed(seed, std::uint64_t(r)));
        perm = labels;
        rng.shuffle(perm);
        if (cross_within_ratio(distances, perm) >= observed) ++n_ge;
    }
    StatReport rep;
    rep.test = "permutation_cluster";
    rep.statistic = observed;
    rep.raw_p = double(1 + n_ge) / double(n_perm + 1);
    rep.n_a = int(labels.size());
    rep.n_b = int(counts.size());
    return rep;
}

std::string stat_report_csv(const std::vector<StatReport>& reports) {
    std::ostringstream out;
    out << "test,family,statistic,raw_p,adjusted_p,effect_size,ci_low,ci_high,n_a,n_b\n";
    auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string("");
    };
    for (const StatReport& r : reports) {
        out << r.test << "," << r.family << "," << format_double(r.statistic) << ","
            << format_double(r.raw_p) << "," << opt(r.adjusted_p) << "," << opt(r.effect_size)
            << "," << opt(r.ci_low) << "," << opt(r.ci_high) << "," << r.n_a << "," << r.n_b
            << "\n";
    }
    return out.str();
}

}  // namespace searchlab
