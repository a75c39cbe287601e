#pragma once

#include <cmath>
#include <span>

#include "../error.hpp"
#include "../stats.hpp"
#include "association.hpp"

namespace insight::detectors {

struct CentralMoments {
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
};

inline CentralMoments central_moments(std::span<const double> xs) {
    CentralMoments m;
    const double mu = mean(xs);
    for (double x : xs) {
        const double d = x - mu;
        const double d2 = d * d;
        m.m2 += d2;
        m.m3 += d2 * d;
        m.m4 += d2 * d2;
    }
    const auto n = static_cast<double>(xs.size());
    m.m2 /= n;
    m.m3 /= n;
    m.m4 /= n;
    return m;
}

// Adjusted Fisher-Pearson skewness G1.
inline double sample_skewness(std::span<const double> xs) {
    if (xs.size() < 8) throw PreconditionError("skewness needs at least 8 rows");
    if (is_constant(xs)) throw PreconditionError("zero variance");
    const auto m = central_moments(xs);
    const auto n = static_cast<double>(xs.size());
    const double g1 = m.m3 / std::pow(m.m2, 1.5);
    return g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0);
}

// Moment excess kurtosis g2 = m4 / m2^2 - 3.
inline double excess_kurtosis(std::span<const double> xs) {
    if (xs.size() < 8) throw PreconditionError("kurtosis needs at least 8 rows");
    if (is_constant(xs)) throw PreconditionError("zero variance");
    const auto m = central_moments(xs);
    return m.m4 / (m.m2 * m.m2) - 3.0;
}

inline double skewness_score(std::span<const double> xs) { return std::abs(sample_skewness(xs)); }

inline double heavy_tail_score(std::span<const double> xs) { return std::max(0.0, excess_kurtosis(xs)); }

// Maps an unbounded non-negative statistic into [0, 1).
inline double bounded(double s) { return s / (1.0 + s); }

}  // namespace insight::detectors
