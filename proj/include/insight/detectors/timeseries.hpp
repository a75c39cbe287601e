#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include "../error.hpp"
#include "../stats.hpp"
#include "association.hpp"

namespace insight::detectors {

// Row indices ordered by time; ties keep input order.
inline std::vector<std::size_t> time_order(std::span<const double> t) {
    std::vector<std::size_t> order(t.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
    return order;
}

inline std::vector<double> gather(std::span<const double> xs, std::span<const std::size_t> order) {
    std::vector<double> out;
    out.reserve(order.size());
    for (auto i : order) out.push_back(xs[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Trend

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

// Ordinary least squares of y on t.
inline LinearFit fit_trend(std::span<const double> t, std::span<const double> y) {
    require_same_length(t, y);
    if (is_constant(t) || is_constant(y)) throw PreconditionError("zero variance");
    const double mt = mean(t), my = mean(y);
    double stt = 0.0, sty = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        stt += (t[i] - mt) * (t[i] - mt);
        sty += (t[i] - mt) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit fit;
    fit.slope = sty / stt;
    fit.intercept = my - fit.slope * mt;
    fit.r2 = std::clamp(sty * sty / (stt * syy), 0.0, 1.0);
    return fit;
}

inline double trend_score(std::span<const double> t, std::span<const double> y) { return fit_trend(t, y).r2; }

// Mann-Kendall S normalized by n(n-1)/2 (signed).
inline double mann_kendall_tau(std::span<const double> t, std::span<const double> y) {
    require_same_length(t, y);
    const std::size_t n = t.size();
    const auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
    long long s = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) s += sign(t[j] - t[i]) * sign(y[j] - y[i]);
    return static_cast<double>(s) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

inline double mann_kendall_score(std::span<const double> t, std::span<const double> y) {
    return std::abs(mann_kendall_tau(t, y));
}

// ---------------------------------------------------------------------------
// Rolling-median residual outliers

namespace detail {

inline double window_median(std::vector<double>& buf) {
    const std::size_t mid = buf.size() / 2;
    std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid), buf.end());
    const double upper = buf[mid];
    if (buf.size() % 2 == 1) return upper;
    const double lower = *std::max_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

// Scores for one time-ordered series. Windows are centered and shrink
// symmetrically near the ends.
inline std::vector<double> rolling_residual_series(std::span<const double> xs, std::size_t window) {
    const std::size_t m = xs.size();
    const std::size_t half = window / 2;
    std::vector<double> scores(m, 0.0);
    std::vector<double> buf;
    for (std::size_t p = 0; p < m; ++p) {
        const std::size_t h = std::min({half, p, m - 1 - p});
        buf.assign(xs.begin() + static_cast<std::ptrdiff_t>(p - h), xs.begin() + static_cast<std::ptrdiff_t>(p + h + 1));
        const double med = window_median(buf);
        double abs_sum = 0.0;
        for (double& v : buf) {
            v = std::abs(v - med);
            abs_sum += v;
        }
        // Window values were overwritten with absolute deviations.
        double scale = 1.4826 * window_median(buf);
        if (!(scale > 0.0)) scale = 1.2533 * abs_sum / static_cast<double>(buf.size());
        const double residual = std::abs(xs[p] - med);
        scores[p] = scale > 0.0 ? residual / scale : 0.0;
    }
    return scores;
}

}  // namespace detail

// |x - rolling median| / (1.4826 * rolling MAD), per series. When the window
// MAD is zero the scale falls back to 1.2533 * mean absolute deviation, and to a
// zero score when that is zero as well. `groups`, when given, splits the rows
// into independent series.
inline std::vector<double> rolling_residual_outlier_scores(std::span<const double> t, std::span<const double> y,
                                                           std::span<const double> groups = {},
                                                           std::size_t window = 7) {
    require_same_length(t, y);
    if (window < 3) throw ConfigError("rolling window must be at least 3");
    std::vector<double> scores(t.size(), 0.0);
    std::map<double, std::vector<std::size_t>> series;
    for (std::size_t i = 0; i < t.size(); ++i) series[groups.empty() ? 0.0 : groups[i]].push_back(i);
    for (auto& [_, rows] : series) {
        std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
        const auto values = gather(y, rows);
        const auto s = detail::rolling_residual_series(values, window);
        for (std::size_t k = 0; k < rows.size(); ++k) scores[rows[k]] = s[k];
    }
    return scores;
}

// ---------------------------------------------------------------------------
// Peaks

// Spike significance of local maxima: for every point, the mean difference to
// the neighbors within `w` positions; standardized over the series. Local
// maxima whose standardized value exceeds `threshold` are returned.
inline std::vector<std::pair<std::size_t, double>> peak_scores(std::span<const double> t, std::span<const double> y,
                                                                std::size_t w = 3, double threshold = 1.0) {
    require_same_length(t, y);
    if (w < 1) throw ConfigError("peak window must be at least 1");
    const auto order = time_order(t);
    const auto xs = gather(y, order);
    const std::size_t m = xs.size();
    std::vector<double> s(m, 0.0);
    for (std::size_t p = 0; p < m; ++p) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t q = p >= w ? p - w : 0; q <= std::min(m - 1, p + w); ++q) {
            if (q == p) continue;
            sum += xs[p] - xs[q];
            ++count;
        }
        s[p] = count > 0 ? sum / static_cast<double>(count) : 0.0;
    }
    const double mu = mean(s);
    const double sd = stddev(s);
    std::vector<std::pair<std::size_t, double>> out;
    if (!(sd > 0.0)) return out;
    for (std::size_t p = 1; p + 1 < m; ++p) {
        if (!(xs[p] > xs[p - 1])) continue;
        std::size_t q = p + 1;
        while (q < m && xs[q] == xs[p]) ++q;
        if (q == m || !(xs[q] < xs[p])) continue;
        const double z = (s[p] - mu) / sd;
        if (z > threshold) out.emplace_back(order[p], z);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Seasonality

struct Seasonality {
    double score = 0.0;
    std::size_t lag = 0;
};

// Maximum autocorrelation over lags min_lag..n/3 of the linearly detrended
// time-ordered series, clamped to [0, 1].
inline Seasonality seasonality(std::span<const double> t, std::span<const double> y, std::size_t min_lag = 2) {
    require_same_length(t, y);
    const std::size_t n = t.size();
    if (n < 24) throw PreconditionError("series too short");
    const auto xs = gather(y, time_order(t));
    std::vector<double> pos(n);
    std::iota(pos.begin(), pos.end(), 0.0);
    if (is_constant(xs)) throw PreconditionError("zero variance");
    const auto fit = fit_trend(pos, xs);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = xs[i] - (fit.intercept + fit.slope * pos[i]);
    double denom = 0.0;
    for (double v : r) denom += v * v;
    const double total = variance(xs) * static_cast<double>(n - 1);
    // An exactly linear series leaves only rounding noise.
    if (!(denom > 1e-18 * total)) throw PreconditionError("zero variance");
    Seasonality best;
    best.score = -1.0;
    for (std::size_t k = min_lag; k <= n / 3; ++k) {
        double num = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) num += r[i] * r[i + k];
        const double acf = num / denom;
        if (acf > best.score) {
            best.score = acf;
            best.lag = k;
        }
    }
    best.score = std::clamp(best.score, 0.0, 1.0);
    return best;
}

inline double seasonality_score(std::span<const double> t, std::span<const double> y) { return seasonality(t, y).score; }

// ---------------------------------------------------------------------------
// Granger causality

struct GrangerResult {
    double score = 0.0;
    double p_x_to_y = 1.0;
    double p_y_to_x = 1.0;
    // +1 when x -> y is the stronger direction, -1 otherwise.
    int direction = 1;
};

namespace detail {

inline double residual_sum_of_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& target) {
    const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(target);
    return (target - design * beta).squaredNorm();
}

// p-value of the F test that `cause` lags add information about `effect`.
inline double granger_p_value(const std::vector<double>& cause, const std::vector<double>& effect, std::size_t lag) {
    const std::size_t n = effect.size();
    const auto rows = static_cast<Eigen::Index>(n - lag);
    const auto p = static_cast<Eigen::Index>(lag);
    Eigen::MatrixXd restricted(rows, 1 + p);
    Eigen::MatrixXd full(rows, 1 + 2 * p);
    Eigen::VectorXd target(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t t = static_cast<std::size_t>(r) + lag;
        target(r) = effect[t];
        restricted(r, 0) = 1.0;
        full(r, 0) = 1.0;
        for (Eigen::Index k = 1; k <= p; ++k) {
            restricted(r, k) = effect[t - static_cast<std::size_t>(k)];
            full(r, k) = effect[t - static_cast<std::size_t>(k)];
            full(r, p + k) = cause[t - static_cast<std::size_t>(k)];
        }
    }
    const double rss_r = residual_sum_of_squares(restricted, target);
    const double rss_u = residual_sum_of_squares(full, target);
    const double df1 = static_cast<double>(lag);
    const double df2 = static_cast<double>(rows) - static_cast<double>(2 * lag + 1);
    if (!(rss_r > rss_u)) return 1.0;
    if (!(rss_u > 1e-12 * rss_r)) return 0.0;
    const double f = ((rss_r - rss_u) / df1) / (rss_u / df2);
    const boost::math::fisher_f_distribution<double> dist(df1, df2);
    return boost::math::cdf(boost::math::complement(dist, f));
}

}  // namespace detail

// Lag-`lag` Granger F tests in both directions. The smaller p-value is
// Sidak-adjusted for the two tests, so the score 1 - p is uniform on [0, 1]
// for independent series.
inline GrangerResult granger_causality(std::span<const double> t, std::span<const double> x, std::span<const double> y,
                                       std::size_t lag = 2) {
    require_same_length(t, x);
    require_same_length(t, y);
    if (lag < 1) throw ConfigError("granger lag must be at least 1");
    if (t.size() < 4 * lag + 4) throw PreconditionError("series too short for granger lag");
    const auto order = time_order(t);
    auto xs = gather(x, order);
    auto ys = gather(y, order);
    if (is_constant(xs) || is_constant(ys)) throw PreconditionError("zero variance");
    standardize(xs);
    standardize(ys);
    GrangerResult out;
    out.p_x_to_y = detail::granger_p_value(xs, ys, lag);
    out.p_y_to_x = detail::granger_p_value(ys, xs, lag);
    out.direction = out.p_x_to_y <= out.p_y_to_x ? 1 : -1;
    const double p_min = std::min(out.p_x_to_y, out.p_y_to_x);
    const double p_adjusted = 1.0 - (1.0 - p_min) * (1.0 - p_min);
    out.score = std::clamp(1.0 - p_adjusted, 0.0, 1.0);
    return out;
}

}  // namespace insight::detectors
