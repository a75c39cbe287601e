#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "../error.hpp"
#include "../stats.hpp"

namespace insight::detectors {

inline bool is_constant(std::span<const double> xs) {
    if (xs.empty()) return true;
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    return *lo == *hi;
}

inline void require_same_length(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw PreconditionError("columns differ in length");
    if (x.size() < 2) throw PreconditionError("need at least 2 rows");
}

// Signed Pearson r.
inline double pearson_statistic(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    if (is_constant(x) || is_constant(y)) throw PreconditionError("zero variance");
    return pearson_r(x, y);
}

inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    return std::abs(pearson_statistic(x, y));
}

// Signed Spearman rho on average-tied ranks.
inline double spearman_statistic(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    if (is_constant(x) || is_constant(y)) throw PreconditionError("zero variance");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson_r(rx, ry);
}

inline double spearman_correlation(std::span<const double> x, std::span<const double> y) {
    return std::abs(spearman_statistic(x, y));
}

// ---------------------------------------------------------------------------
// Discretization and contingency tables

// Dense codes 0..k-1. Categorical ids are remapped in ascending id order;
// numerical values fall into `bins` equal-width bins over [min, max].
inline std::vector<std::size_t> discretize(std::span<const double> xs, bool categorical, std::size_t bins,
                                           std::size_t& levels) {
    std::vector<std::size_t> codes(xs.size(), 0);
    if (xs.empty()) {
        levels = 0;
        return codes;
    }
    if (categorical) {
        std::map<double, std::size_t> ids;
        for (double x : xs) ids.emplace(x, 0);
        std::size_t next = 0;
        for (auto& [_, id] : ids) id = next++;
        for (std::size_t i = 0; i < xs.size(); ++i) codes[i] = ids[xs[i]];
        levels = ids.size();
        return codes;
    }
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    const double lo = *lo_it, hi = *hi_it;
    levels = std::max<std::size_t>(bins, 1);
    if (!(hi > lo)) {
        levels = 1;
        return codes;
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double pos = (xs[i] - lo) / (hi - lo) * static_cast<double>(levels);
        codes[i] = std::min(static_cast<std::size_t>(std::max(pos, 0.0)), levels - 1);
    }
    return codes;
}

struct Contingency {
    std::size_t rows = 0, cols = 0;
    std::vector<double> counts;  // rows x cols
    std::vector<double> row_totals, col_totals;
    double total = 0.0;

    double at(std::size_t r, std::size_t c) const { return counts[r * cols + c]; }
};

inline Contingency contingency(std::span<const std::size_t> a, std::size_t a_levels, std::span<const std::size_t> b,
                               std::size_t b_levels) {
    Contingency t;
    t.rows = a_levels;
    t.cols = b_levels;
    t.counts.assign(a_levels * b_levels, 0.0);
    t.row_totals.assign(a_levels, 0.0);
    t.col_totals.assign(b_levels, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        t.counts[a[i] * b_levels + b[i]] += 1.0;
        t.row_totals[a[i]] += 1.0;
        t.col_totals[b[i]] += 1.0;
    }
    t.total = static_cast<double>(a.size());
    return t;
}

inline double entropy(std::span<const double> counts, double total) {
    double h = 0.0;
    for (double c : counts)
        if (c > 0.0) h -= (c / total) * std::log(c / total);
    return h;
}

// Plug-in mutual information normalized by min(H(X), H(Y)); zero when either
// marginal entropy is zero.
inline double mutual_information(std::span<const double> x, bool x_categorical, std::span<const double> y,
                                 bool y_categorical, std::size_t bins = 10) {
    require_same_length(x, y);
    std::size_t xl = 0, yl = 0;
    const auto xc = discretize(x, x_categorical, bins, xl);
    const auto yc = discretize(y, y_categorical, bins, yl);
    const auto t = contingency(xc, xl, yc, yl);
    const double hx = entropy(t.row_totals, t.total);
    const double hy = entropy(t.col_totals, t.total);
    const double h_min = std::min(hx, hy);
    if (!(h_min > 1e-15)) return 0.0;
    const double mi = hx + hy - entropy(t.counts, t.total);
    return std::clamp(mi / h_min, 0.0, 1.0);
}

inline Contingency categorical_table(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    std::size_t xl = 0, yl = 0;
    const auto xc = discretize(x, true, 0, xl);
    const auto yc = discretize(y, true, 0, yl);
    if (xl < 2 || yl < 2) throw PreconditionError("degenerate contingency");
    return contingency(xc, xl, yc, yl);
}

// Bias-corrected Cramer's V.
inline double cramers_v(std::span<const double> x, std::span<const double> y) {
    const auto t = categorical_table(x, y);
    const double n = t.total;
    double chi2 = 0.0;
    for (std::size_t r = 0; r < t.rows; ++r) {
        for (std::size_t c = 0; c < t.cols; ++c) {
            const double expected = t.row_totals[r] * t.col_totals[c] / n;
            if (expected > 0.0) chi2 += (t.at(r, c) - expected) * (t.at(r, c) - expected) / expected;
        }
    }
    const double r = static_cast<double>(t.rows), k = static_cast<double>(t.cols);
    const double phi2 = chi2 / n;
    const double phi2_corr = std::max(0.0, phi2 - (k - 1.0) * (r - 1.0) / (n - 1.0));
    const double r_corr = r - (r - 1.0) * (r - 1.0) / (n - 1.0);
    const double k_corr = k - (k - 1.0) * (k - 1.0) / (n - 1.0);
    const double denom = std::min(k_corr - 1.0, r_corr - 1.0);
    if (!(denom > 0.0)) return 0.0;
    return std::clamp(std::sqrt(phi2_corr / denom), 0.0, 1.0);
}

struct FlaggedCell {
    double x_category = 0.0;  // category id as stored in the column
    double y_category = 0.0;
    double residual = 0.0;
};

struct ChisqResidualResult {
    std::vector<std::pair<std::size_t, double>> rows;  // (row, |residual|)
    std::vector<FlaggedCell> cells;
};

// Adjusted (standardized) Pearson residuals; rows in cells with
// |residual| > threshold are returned with that magnitude.
inline ChisqResidualResult chisq_residual_outlier_scores(std::span<const double> x, std::span<const double> y,
                                                         double threshold = 2.0) {
    const auto t = categorical_table(x, y);
    std::size_t xl = 0, yl = 0;
    const auto xc = discretize(x, true, 0, xl);
    const auto yc = discretize(y, true, 0, yl);
    std::vector<double> x_ids, y_ids;
    {
        std::map<double, int> sx, sy;
        for (double v : x) sx.emplace(v, 0);
        for (double v : y) sy.emplace(v, 0);
        for (auto& [v, _] : sx) x_ids.push_back(v);
        for (auto& [v, _] : sy) y_ids.push_back(v);
    }

    const double n = t.total;
    std::vector<double> residual(t.rows * t.cols, 0.0);
    std::vector<char> flagged(t.rows * t.cols, 0);
    ChisqResidualResult out;
    for (std::size_t r = 0; r < t.rows; ++r) {
        for (std::size_t c = 0; c < t.cols; ++c) {
            const double expected = t.row_totals[r] * t.col_totals[c] / n;
            const double scale = expected * (1.0 - t.row_totals[r] / n) * (1.0 - t.col_totals[c] / n);
            if (!(expected > 0.0) || !(scale > 0.0)) continue;
            const double res = (t.at(r, c) - expected) / std::sqrt(scale);
            if (std::abs(res) > threshold && t.at(r, c) > 0.0) {
                residual[r * t.cols + c] = res;
                flagged[r * t.cols + c] = 1;
                out.cells.push_back({x_ids[r], y_ids[c], res});
            }
        }
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t cell = xc[i] * t.cols + yc[i];
        if (flagged[cell]) out.rows.emplace_back(i, std::abs(residual[cell]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Group difference

struct KruskalWallis {
    double h = 0.0;
    double p_value = 1.0;
    std::size_t groups = 0;
};

// Kruskal-Wallis H with tie correction, chi-square approximation. Groups with
// fewer than 2 rows are excluded.
inline KruskalWallis kruskal_wallis(std::span<const double> groups, std::span<const double> values) {
    require_same_length(groups, values);
    std::map<double, std::size_t> sizes;
    for (double g : groups) ++sizes[g];
    std::vector<double> kept_values, kept_groups;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (sizes[groups[i]] >= 2) {
            kept_values.push_back(values[i]);
            kept_groups.push_back(groups[i]);
        }
    }
    std::size_t group_count = 0;
    for (const auto& [_, size] : sizes)
        if (size >= 2) ++group_count;
    if (group_count < 2) throw PreconditionError("fewer than 2 groups with at least 2 rows");

    const auto ranks = average_ranks(kept_values);
    const double n = static_cast<double>(kept_values.size());
    std::map<double, std::pair<double, double>> rank_sums;  // group -> (sum, count)
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        auto& [sum, count] = rank_sums[kept_groups[i]];
        sum += ranks[i];
        count += 1.0;
    }
    double h = 0.0;
    for (const auto& [_, sc] : rank_sums) h += sc.first * sc.first / sc.second;
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);

    std::map<double, double> ties;
    for (double v : kept_values) ties[v] += 1.0;
    double tie_sum = 0.0;
    for (const auto& [_, t] : ties) tie_sum += t * t * t - t;
    const double correction = 1.0 - tie_sum / (n * n * n - n);

    KruskalWallis out;
    out.groups = group_count;
    if (!(correction > 0.0)) return out;  // every value identical
    out.h = std::max(0.0, h / correction);
    const boost::math::chi_squared_distribution<double> dist(static_cast<double>(group_count - 1));
    out.p_value = out.h > 0.0 ? boost::math::cdf(boost::math::complement(dist, out.h)) : 1.0;
    return out;
}

inline double group_difference_score(std::span<const double> groups, std::span<const double> values) {
    return std::clamp(1.0 - kruskal_wallis(groups, values).p_value, 0.0, 1.0);
}

}  // namespace insight::detectors
