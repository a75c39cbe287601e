#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "../error.hpp"
#include "../stats.hpp"

namespace insight::detectors {

using ColumnSet = std::span<const std::vector<double>>;

namespace detail {

inline std::size_t checked_rows(ColumnSet columns) {
    if (columns.empty()) throw PreconditionError("no columns");
    const std::size_t n = columns.front().size();
    for (const auto& c : columns)
        if (c.size() != n) throw PreconditionError("columns differ in length");
    return n;
}

// Row-major point matrix, optionally z-scored per column.
inline std::vector<double> to_points(ColumnSet columns, bool standardize_columns) {
    const std::size_t n = checked_rows(columns);
    const std::size_t d = columns.size();
    std::vector<double> points(n * d);
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> col = columns[j];
        if (standardize_columns) standardize(col);
        for (std::size_t i = 0; i < n; ++i) points[i * d + j] = col[i];
    }
    return points;
}

inline double squared_distance(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return s;
}

// Distance from point `i` to its k-th nearest other point.
inline double kth_neighbor_distance(const std::vector<double>& points, std::size_t n, std::size_t d, std::size_t i,
                                    std::size_t k, std::vector<double>& scratch) {
    scratch.clear();
    for (std::size_t j = 0; j < n; ++j)
        if (j != i) scratch.push_back(squared_distance(&points[i * d], &points[j * d], d));
    if (scratch.empty()) return 0.0;
    const std::size_t kk = std::min(k, scratch.size()) - 1;
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(kk), scratch.end());
    return std::sqrt(scratch[kk]);
}

inline double harmonic(double i) { return std::log(i) + 0.5772156649015329; }

// Average unsuccessful-search path length in a BST of n nodes.
inline double average_path_length(double n) {
    if (n <= 1.0) return 0.0;
    if (n <= 2.0) return 1.0;
    return 2.0 * harmonic(n - 1.0) - 2.0 * (n - 1.0) / n;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Single-variable

struct TukeyFences {
    double q1 = 0.0, q3 = 0.0, low = 0.0, high = 0.0;
    double iqr() const { return q3 - q1; }
};

inline TukeyFences tukey_fences(std::span<const double> xs, double k = 1.5) {
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    TukeyFences f;
    f.q1 = quantile_sorted(sorted, 0.25);
    f.q3 = quantile_sorted(sorted, 0.75);
    f.low = f.q1 - k * f.iqr();
    f.high = f.q3 + k * f.iqr();
    return f;
}

// Distance beyond the Tukey fences in IQR units; zero inside the fences.
inline std::vector<double> iqr_outlier_scores(std::span<const double> xs, double k = 1.5) {
    std::vector<double> scores(xs.size(), 0.0);
    if (xs.empty()) return scores;
    const auto f = tukey_fences(xs, k);
    if (!(f.iqr() > 0.0)) return scores;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double beyond = std::max({0.0, f.low - xs[i], xs[i] - f.high});
        scores[i] = beyond / f.iqr();
    }
    return scores;
}

inline std::vector<double> zscore_outlier_scores(std::span<const double> xs) {
    std::vector<double> scores(xs.size(), 0.0);
    const double s = stddev(xs);
    if (!(s > 0.0)) return scores;
    const double m = mean(xs);
    for (std::size_t i = 0; i < xs.size(); ++i) scores[i] = std::abs(xs[i] - m) / s;
    return scores;
}

// ---------------------------------------------------------------------------
// DBSCAN

struct DbscanParams {
    double eps = 0.0;            // <= 0 selects eps from the k-distance distribution
    std::size_t min_pts = 0;     // 0 selects max(4, 2 * dims)
    double eps_quantile = 0.95;  // k-distance quantile used when eps is automatic
    bool standardize = true;
};

struct DbscanResult {
    std::vector<double> scores;
    double eps = 0.0;
    std::size_t min_pts = 0;
    std::size_t core_count = 0;
};

inline DbscanResult dbscan_outlier_scores(ColumnSet columns, DbscanParams params = {}) {
    const std::size_t n = detail::checked_rows(columns);
    const std::size_t d = columns.size();
    const auto points = detail::to_points(columns, params.standardize);
    DbscanResult out;
    out.scores.assign(n, 0.0);
    out.min_pts = params.min_pts > 0 ? params.min_pts : std::max<std::size_t>(4, 2 * d);
    if (n == 0) return out;

    std::vector<double> scratch;
    double eps = params.eps;
    if (!(eps > 0.0)) {
        // Estimate from at most 2000 evenly strided query points.
        const std::size_t stride = std::max<std::size_t>(1, n / 2000);
        std::vector<double> kdist;
        for (std::size_t i = 0; i < n; i += stride)
            kdist.push_back(detail::kth_neighbor_distance(points, n, d, i, out.min_pts, scratch));
        eps = quantile(kdist, params.eps_quantile);
        if (!(eps > 0.0)) {
            double smallest = std::numeric_limits<double>::infinity();
            for (double k : kdist)
                if (k > 0.0) smallest = std::min(smallest, k);
            eps = std::isfinite(smallest) ? smallest : 1.0;
        }
    }
    out.eps = eps;

    // Sweep over the first coordinate to bound radius queries.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return points[a * d] < points[b * d] || (points[a * d] == points[b * d] && a < b);
    });
    const double eps2 = eps * eps;
    std::vector<char> core(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t i = order[pos];
        std::size_t count = 1;
        for (std::size_t q = pos + 1; q < n && points[order[q] * d] - points[i * d] <= eps; ++q)
            if (detail::squared_distance(&points[i * d], &points[order[q] * d], d) <= eps2) ++count;
        for (std::size_t q = pos; q-- > 0 && points[i * d] - points[order[q] * d] <= eps;)
            if (detail::squared_distance(&points[i * d], &points[order[q] * d], d) <= eps2) ++count;
        core[i] = count >= out.min_pts;
    }
    std::vector<std::size_t> cores;
    for (std::size_t i = 0; i < n; ++i)
        if (core[i]) cores.push_back(i);
    out.core_count = cores.size();

    if (cores.empty()) {
        for (std::size_t i = 0; i < n; ++i)
            out.scores[i] = detail::kth_neighbor_distance(points, n, d, i, out.min_pts, scratch);
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        double best = std::numeric_limits<double>::infinity();
        for (auto c : cores) best = std::min(best, detail::squared_distance(&points[i * d], &points[c * d], d));
        const double dist = std::sqrt(best);
        // Border points (within eps of a core point) belong to a cluster.
        out.scores[i] = dist <= eps ? 0.0 : dist / eps;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Isolation forest

struct IsolationForestParams {
    std::size_t n_trees = 100;
    std::size_t subsample = 256;
    std::uint64_t seed = 42;
};

class IsolationForest {
public:
    IsolationForest(ColumnSet columns, IsolationForestParams params) : dims_(columns.size()) {
        if (params.n_trees < 2) throw ConfigError("isolation forest needs at least 2 trees");
        if (params.subsample < 2) throw ConfigError("isolation forest subsample must be at least 2");
        n_ = detail::checked_rows(columns);
        points_ = detail::to_points(columns, false);
        sample_size_ = std::min(params.subsample, n_);
        height_limit_ = static_cast<std::size_t>(std::ceil(std::log2(std::max<std::size_t>(sample_size_, 2))));
        Rng rng(params.seed);
        std::vector<std::size_t> pool(n_);
        std::iota(pool.begin(), pool.end(), 0);
        trees_.reserve(params.n_trees);
        for (std::size_t t = 0; t < params.n_trees; ++t) {
            for (std::size_t i = 0; i < sample_size_; ++i) std::swap(pool[i], pool[i + rng.below(n_ - i)]);
            std::vector<std::size_t> sample(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(sample_size_));
            Tree tree;
            grow(tree, sample, 0, rng);
            trees_.push_back(std::move(tree));
        }
    }

    // s(x) = 2^(-E[h(x)] / c(psi)), in (0, 1).
    double score(const double* point) const {
        double total = 0.0;
        for (const auto& tree : trees_) total += path_length(tree, point);
        const double expected = total / static_cast<double>(trees_.size());
        const double norm = detail::average_path_length(static_cast<double>(sample_size_));
        return norm > 0.0 ? std::pow(2.0, -expected / norm) : 0.5;
    }

    std::vector<double> scores() const {
        std::vector<double> out(n_);
        for (std::size_t i = 0; i < n_; ++i) out[i] = score(&points_[i * dims_]);
        return out;
    }

private:
    struct Node {
        std::size_t feature = 0;
        double threshold = 0.0;
        std::int32_t left = -1, right = -1;  // -1 marks a leaf
        std::size_t size = 0;
    };
    using Tree = std::vector<Node>;

    std::int32_t grow(Tree& tree, std::vector<std::size_t>& idx, std::size_t depth, Rng& rng) {
        const auto id = static_cast<std::int32_t>(tree.size());
        tree.push_back(Node{});
        tree[id].size = idx.size();
        if (depth >= height_limit_ || idx.size() <= 1) return id;

        std::vector<std::size_t> splittable;
        std::vector<std::pair<double, double>> ranges(dims_);
        for (std::size_t j = 0; j < dims_; ++j) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (auto i : idx) {
                lo = std::min(lo, points_[i * dims_ + j]);
                hi = std::max(hi, points_[i * dims_ + j]);
            }
            ranges[j] = {lo, hi};
            if (hi > lo) splittable.push_back(j);
        }
        if (splittable.empty()) return id;
        const std::size_t feature = splittable[rng.below(splittable.size())];
        const auto [lo, hi] = ranges[feature];
        double threshold = rng.uniform(lo, hi);
        if (threshold <= lo) threshold = lo + (hi - lo) * 0.5;

        std::vector<std::size_t> left, right;
        for (auto i : idx) (points_[i * dims_ + feature] < threshold ? left : right).push_back(i);
        idx.clear();
        idx.shrink_to_fit();
        tree[id].feature = feature;
        tree[id].threshold = threshold;
        const auto l = grow(tree, left, depth + 1, rng);
        const auto r = grow(tree, right, depth + 1, rng);
        tree[id].left = l;
        tree[id].right = r;
        return id;
    }

    double path_length(const Tree& tree, const double* point) const {
        std::int32_t node = 0;
        double depth = 0.0;
        while (tree[node].left >= 0) {
            node = point[tree[node].feature] < tree[node].threshold ? tree[node].left : tree[node].right;
            depth += 1.0;
        }
        return depth + detail::average_path_length(static_cast<double>(tree[node].size));
    }

    std::size_t dims_ = 0;
    std::size_t n_ = 0;
    std::size_t sample_size_ = 0;
    std::size_t height_limit_ = 0;
    std::vector<double> points_;
    std::vector<Tree> trees_;
};

inline std::vector<double> isolation_forest_scores(ColumnSet columns, IsolationForestParams params = {}) {
    return IsolationForest(columns, params).scores();
}

// ---------------------------------------------------------------------------
// Mahalanobis

// Squared Mahalanobis distance to the mean. Columns are z-scored first and the
// correlation matrix gets a ridge of 1e-6 * trace / d, which keeps the result
// invariant under positive affine rescaling of any column.
inline std::vector<double> mahalanobis_scores(ColumnSet columns, double ridge_factor = 1e-6) {
    const std::size_t n = detail::checked_rows(columns);
    const std::size_t d = columns.size();
    std::vector<double> scores(n, 0.0);
    if (n < 2) return scores;
    const auto points = detail::to_points(columns, true);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = points[i * d + j];
    const Eigen::RowVectorXd mu = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mu;
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    const double trace = cov.trace();
    if (!(trace > 0.0)) return scores;
    cov.diagonal().array() += ridge_factor * trace / static_cast<double>(d);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    const Eigen::MatrixXd solved = ldlt.solve(centered.transpose());
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        scores[i] = std::max(0.0, centered.row(k).dot(solved.col(k)));
    }
    return scores;
}

// ---------------------------------------------------------------------------
// k-means

struct KMeansParams {
    std::size_t k = 3;
    std::size_t iterations = 50;
    std::uint64_t seed = 42;
    bool standardize = true;
};

struct KMeansResult {
    std::vector<double> scores;  // distance to the assigned centroid
    std::vector<std::size_t> assignment;
    std::vector<double> centroids;  // k x d row-major
};

inline KMeansResult kmeans_distance_scores(ColumnSet columns, KMeansParams params = {}) {
    const std::size_t n = detail::checked_rows(columns);
    const std::size_t d = columns.size();
    if (params.k < 1) throw ConfigError("k-means needs k >= 1");
    if (params.k >= n) throw ConfigError("k-means needs k < number of rows");
    const auto points = detail::to_points(columns, params.standardize);
    const std::size_t k = params.k;
    Rng rng(params.seed);

    // k-means++ seeding.
    std::vector<double> centroids;
    centroids.reserve(k * d);
    const std::size_t first = rng.below(n);
    centroids.insert(centroids.end(), &points[first * d], &points[first * d] + d);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < k; ++c) {
        const double* last = &centroids[(c - 1) * d];
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], detail::squared_distance(&points[i * d], last, d));
            total += nearest[i];
        }
        std::size_t pick = n - 1;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (std::size_t i = 0; i < n; ++i) {
                target -= nearest[i];
                if (target < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.below(n);
        }
        centroids.insert(centroids.end(), &points[pick * d], &points[pick * d] + d);
    }

    std::vector<std::size_t> assignment(n, 0);
    for (std::size_t iter = 0; iter < params.iterations; ++iter) {
        bool changed = iter == 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double dist = detail::squared_distance(&points[i * d], &centroids[c * d], d);
                if (dist < best_d) {
                    best_d = dist;
                    best = c;
                }
            }
            if (assignment[i] != best) changed = true;
            assignment[i] = best;
        }
        if (!changed) break;
        std::vector<double> sums(k * d, 0.0);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[assignment[i]];
            for (std::size_t j = 0; j < d; ++j) sums[assignment[i] * d + j] += points[i * d + j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its centroid
            for (std::size_t j = 0; j < d; ++j) centroids[c * d + j] = sums[c * d + j] / static_cast<double>(counts[c]);
        }
    }

    KMeansResult out;
    out.scores.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.scores[i] = std::sqrt(detail::squared_distance(&points[i * d], &centroids[assignment[i] * d], d));
    out.assignment = std::move(assignment);
    out.centroids = std::move(centroids);
    return out;
}

// ---------------------------------------------------------------------------
// Kernel mean embedding distance

enum class Kernel { Linear, Rbf, Polynomial };

struct KernelMeanParams {
    Kernel kernel = Kernel::Rbf;
    double gamma = 0.0;  // <= 0 selects 1 / dims
    double degree = 2.0;
    double coef0 = 1.0;
    std::size_t reference_size = 1000;  // mean embedding estimated from at most this many rows
    bool standardize = true;
    std::uint64_t seed = 42;
};

// d(x)^2 = k(x,x) - (2/m) sum_j k(x, r_j) + (1/m^2) sum_ij k(r_i, r_j), with the
// reference set r equal to all rows when n <= reference_size.
inline std::vector<double> kernel_mean_distance_scores(ColumnSet columns, KernelMeanParams params = {}) {
    const std::size_t n = detail::checked_rows(columns);
    const std::size_t d = columns.size();
    std::vector<double> scores(n, 0.0);
    if (n == 0) return scores;
    const auto points = detail::to_points(columns, params.standardize);
    const double gamma = params.gamma > 0.0 ? params.gamma : 1.0 / static_cast<double>(d);

    const auto kernel = [&](const double* a, const double* b) {
        switch (params.kernel) {
            case Kernel::Linear: {
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += a[j] * b[j];
                return dot;
            }
            case Kernel::Rbf: return std::exp(-gamma * detail::squared_distance(a, b, d));
            case Kernel::Polynomial: {
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += a[j] * b[j];
                return std::pow(gamma * dot + params.coef0, params.degree);
            }
        }
        return 0.0;
    };

    std::vector<std::size_t> reference(n);
    std::iota(reference.begin(), reference.end(), 0);
    if (n > params.reference_size && params.reference_size > 0) {
        Rng rng(params.seed);
        for (std::size_t i = 0; i < params.reference_size; ++i) std::swap(reference[i], reference[i + rng.below(n - i)]);
        reference.resize(params.reference_size);
        std::sort(reference.begin(), reference.end());
    }
    const auto m = static_cast<double>(reference.size());

    double self_term = 0.0;
    for (auto i : reference)
        for (auto j : reference) self_term += kernel(&points[i * d], &points[j * d]);
    self_term /= m * m;

    for (std::size_t i = 0; i < n; ++i) {
        double cross = 0.0;
        for (auto j : reference) cross += kernel(&points[i * d], &points[j * d]);
        scores[i] = std::max(0.0, kernel(&points[i * d], &points[i * d]) - 2.0 * cross / m + self_term);
    }
    return scores;
}

}  // namespace insight::detectors
