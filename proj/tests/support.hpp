#pragma once

// Synthetic datasets and small helpers shared by the unit and acceptance tests.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "insight/dataset.hpp"
#include "insight/stats.hpp"

namespace testdata {

using insight::AttributeType;
using insight::Column;
using insight::Dataset;

inline Column numeric(std::string name, const std::vector<double>& xs) {
    Column c;
    c.name = std::move(name);
    c.type = AttributeType::Numerical;
    for (double x : xs) c.values.emplace_back(x);
    return c;
}

inline Column temporal(std::string name, std::size_t n, double start = 1.5e9, double step = 3600.0) {
    Column c;
    c.name = std::move(name);
    c.type = AttributeType::Temporal;
    for (std::size_t i = 0; i < n; ++i) c.values.emplace_back(start + step * static_cast<double>(i));
    return c;
}

inline Column categorical(std::string name, const std::vector<std::string>& labels) {
    Column c;
    c.name = std::move(name);
    c.type = AttributeType::Categorical;
    for (const auto& l : labels) {
        auto it = std::find(c.categories.begin(), c.categories.end(), l);
        if (it == c.categories.end()) {
            c.categories.push_back(l);
            it = c.categories.end() - 1;
        }
        c.values.emplace_back(static_cast<double>(it - c.categories.begin()));
    }
    return c;
}

inline std::vector<double> gaussian(insight::Rng& rng, std::size_t n) {
    std::vector<double> xs(n);
    for (auto& x : xs) x = rng.normal();
    return xs;
}

struct PlantedOutliers {
    Dataset dataset;
    std::vector<std::size_t> outlier_rows;
};

// Two independent standard normal columns; five rows moved to radius 8 at
// random angles.
inline PlantedOutliers planted_outliers(std::size_t n = 1000, std::uint64_t seed = 42) {
    insight::Rng rng(seed);
    auto a = gaussian(rng, n);
    auto b = gaussian(rng, n);
    PlantedOutliers out;
    for (std::size_t k = 0; k < 5; ++k) {
        const std::size_t row = (2 * k + 1) * n / 10;
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        a[row] = 8.0 * std::cos(angle);
        b[row] = 8.0 * std::sin(angle);
        out.outlier_rows.push_back(row);
    }
    out.dataset = Dataset("planted_outliers", {numeric("a", a), numeric("b", b)});
    return out;
}

// Three independent noise columns plus one pair with correlation 0.95.
inline Dataset planted_correlation(std::size_t n = 1000, std::uint64_t seed = 42) {
    insight::Rng rng(seed);
    const double rho = 0.95;
    auto u = gaussian(rng, n), x = gaussian(rng, n), v = gaussian(rng, n), w = gaussian(rng, n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = rho * x[i] + std::sqrt(1.0 - rho * rho) * rng.normal();
    return Dataset("planted_correlation", {numeric("u", u), numeric("x", x), numeric("v", v), numeric("y", y), numeric("w", w)});
}

// Hourly series: linear trend plus unit noise, one 8-sigma spike at row 600.
inline Dataset trend_with_spike(std::size_t n = 1000, std::uint64_t seed = 42, double rise = 10.0) {
    insight::Rng rng(seed);
    std::vector<double> value(n);
    for (std::size_t i = 0; i < n; ++i) value[i] = rise * static_cast<double>(i) / static_cast<double>(n) + rng.normal();
    value[600] += 8.0;
    return Dataset("trend_with_spike", {temporal("time", n), numeric("value", value)});
}

// Four independent normal columns, each pair sharing a handful of 8-sigma
// bivariate outliers.
inline Dataset outlier_heavy(std::size_t n = 1000, std::uint64_t seed = 7) {
    insight::Rng rng(seed);
    std::vector<std::vector<double>> cols(4);
    for (auto& c : cols) c = gaussian(rng, n);
    for (std::size_t k = 0; k < 20; ++k) {
        const std::size_t row = rng.below(n);
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const std::size_t i = k % 4, j = (k + 1) % 4;
        cols[i][row] = 8.0 * std::cos(angle);
        cols[j][row] = 8.0 * std::sin(angle);
    }
    return Dataset("outlier_heavy", {numeric("p", cols[0]), numeric("q", cols[1]), numeric("r", cols[2]), numeric("s", cols[3])});
}

// Four columns driven by one shared factor, so every pair correlates.
inline Dataset correlation_heavy(std::size_t n = 1000, std::uint64_t seed = 11) {
    insight::Rng rng(seed);
    const auto f = gaussian(rng, n);
    std::vector<Column> cols;
    const char* names[] = {"p", "q", "r", "s"};
    for (int c = 0; c < 4; ++c) {
        std::vector<double> xs(n);
        for (std::size_t i = 0; i < n; ++i) xs[i] = f[i] + 0.25 * rng.normal();
        cols.push_back(numeric(names[c], xs));
    }
    return Dataset("correlation_heavy", std::move(cols));
}

// A small mixed-type table covering every catalog signature.
inline Dataset mixed(std::size_t n = 240, std::uint64_t seed = 3) {
    insight::Rng rng(seed);
    std::vector<double> x(n), y(n), z(n), s(n);
    std::vector<std::string> city(n), kind(n);
    const char* cities[] = {"oslo", "lima", "pune"};
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.normal();
        y[i] = 2.0 * x[i] + 0.5 * rng.normal();
        z[i] = rng.exponential();
        s[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 12.0) + 0.2 * rng.normal();
        city[i] = cities[rng.below(3)];
        kind[i] = city[i] == "oslo" ? "cold" : (rng.uniform() < 0.5 ? "cold" : "warm");
    }
    return Dataset("mixed", {temporal("day", n, 1.6e9, 86400.0), numeric("x", x), numeric("y", y), numeric("z", z),
                             numeric("wave", s), categorical("city", city), categorical("kind", kind)});
}

// CSV text of a dataset (numeric and categorical columns, temporal as ISO).
inline std::string to_csv(const Dataset& ds) {
    std::string out;
    for (std::size_t c = 0; c < ds.column_count(); ++c) out += (c ? "," : "") + ds.column(c).name;
    out += "\n";
    char buf[64];
    for (std::size_t r = 0; r < ds.row_count(); ++r) {
        for (std::size_t c = 0; c < ds.column_count(); ++c) {
            if (c) out += ",";
            const auto& col = ds.column(c);
            if (!col.values[r]) continue;
            const double v = *col.values[r];
            switch (col.type) {
                case AttributeType::Numerical:
                    std::snprintf(buf, sizeof buf, "%.17g", v);
                    out += buf;
                    break;
                case AttributeType::Temporal: out += insight::format_timestamp(v); break;
                case AttributeType::Categorical: out += col.categories[static_cast<std::size_t>(v)]; break;
            }
        }
        out += "\n";
    }
    return out;
}

}  // namespace testdata
