#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace insight {

// Deterministic generator. Distributions are implemented here instead of
// using <random> distributions, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        // Lemire's multiply-shift with rejection.
        unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(engine_()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        do {
            u = uniform();
        } while (u <= 0.0);
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        spare_ = r * std::sin(2.0 * std::numbers::pi * v);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * v);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential(double rate = 1.0) {
        double u = 0.0;
        do {
            u = uniform();
        } while (u <= 0.0);
        return -std::log(u) / rate;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// FNV-1a, used for seed derivation and config fingerprints.
constexpr std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Sample variance (n - 1 denominator).
inline double variance(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(xs.size() - 1);
}

inline double stddev(std::span<const double> xs) { return std::sqrt(variance(xs)); }

// Quantile of already-sorted data by linear interpolation between closest
// ranks (h = (n - 1) p).
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::span<const double> xs, double p) {
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    return quantile_sorted(sorted, p);
}

inline double median(std::span<const double> xs) { return quantile(xs, 0.5); }

// Ranks starting at 1; tied values share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

// Competition ("1224") ranks of scores, highest score gets rank 1.
inline std::vector<double> competition_ranks_desc(std::span<const double> scores) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<double> ranks(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        if (pos > 0 && scores[order[pos]] == scores[order[pos - 1]]) {
            ranks[order[pos]] = ranks[order[pos - 1]];
        } else {
            ranks[order[pos]] = static_cast<double>(pos + 1);
        }
    }
    return ranks;
}

// Pearson correlation; NaN when either side has zero variance.
inline double pearson_r(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mx = mean(x.first(n));
    const double my = mean(y.first(n));
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Z-score a column in place. Zero-variance columns become all zeros.
inline void standardize(std::vector<double>& xs) {
    const double m = mean(xs);
    const double s = stddev(xs);
    for (double& x : xs) x = s > 0.0 ? (x - m) / s : 0.0;
}

}  // namespace insight
