#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "ranking.hpp"
#include "stats.hpp"

namespace insight {

enum class ChartType { Scatter, Line, Bar, GroupedBar, Histogram, Box, Heatmap, Strip };
enum class AnnotationKind { PointHighlight, TrendLine, Band, CellHighlight };

inline const char* to_string(ChartType t) {
    switch (t) {
        case ChartType::Scatter: return "scatter";
        case ChartType::Line: return "line";
        case ChartType::Bar: return "bar";
        case ChartType::GroupedBar: return "grouped_bar";
        case ChartType::Histogram: return "histogram";
        case ChartType::Box: return "box";
        case ChartType::Heatmap: return "heatmap";
        case ChartType::Strip: return "strip";
    }
    return "?";
}

inline const char* to_string(AnnotationKind k) {
    switch (k) {
        case AnnotationKind::PointHighlight: return "point_highlight";
        case AnnotationKind::TrendLine: return "trend_line";
        case AnnotationKind::Band: return "band";
        case AnnotationKind::CellHighlight: return "cell_highlight";
    }
    return "?";
}

struct AnnotationSpec {
    AnnotationKind kind = AnnotationKind::PointHighlight;
    std::vector<std::size_t> rows;                            // point_highlight: source row ids
    std::vector<std::pair<std::string, std::string>> cells;   // cell_highlight: (x category, y category)
    std::map<std::string, double> coefficients;               // trend_line {a, b}; band {low, high}
    std::string label;
};

using CellValue = std::variant<double, std::string>;

struct InlineData {
    std::vector<std::string> columns;
    std::vector<std::size_t> row_ids;  // source row ids
    std::vector<std::vector<CellValue>> rows;
};

struct ChartSpec {
    ChartType chart_type = ChartType::Scatter;
    double weight = 0.0;
    std::map<std::string, std::string> encodings;  // channel -> column
    std::string transform;                         // "", "binned", "mean", "multi_series"
    InlineData inline_data;
    std::vector<AnnotationSpec> annotations;
    std::string title;
    std::string insight_sentence;
};

inline constexpr std::size_t kInlineRowCap = 2000;

// ---------------------------------------------------------------------------
// Chart inference

namespace detail {

struct ChartRule {
    ChartType type;
    double weight;
    std::vector<std::pair<std::string, std::size_t>> channels;  // channel -> signature slot
    std::string transform;
};

inline const std::map<std::string, std::vector<ChartRule>>& chart_rules() {
    using CT = ChartType;
    static const std::map<std::string, std::vector<ChartRule>> rules = {
        {"N", {{CT::Histogram, 1.0, {{"x", 0}}, ""}, {CT::Box, 0.8, {{"x", 0}}, ""}}},
        {"NN", {{CT::Scatter, 1.0, {{"x", 0}, {"y", 1}}, ""}, {CT::Heatmap, 0.6, {{"x", 0}, {"y", 1}}, "binned"}}},
        {"TN", {{CT::Line, 1.0, {{"x", 0}, {"y", 1}}, ""}, {CT::Scatter, 0.5, {{"x", 0}, {"y", 1}}, ""}}},
        {"TNC", {{CT::Line, 1.0, {{"x", 0}, {"y", 1}, {"color", 2}}, "multi_series"}}},
        {"CC", {{CT::Heatmap, 1.0, {{"x", 0}, {"y", 1}}, "count"}, {CT::GroupedBar, 0.7, {{"x", 0}, {"color", 1}}, "count"}}},
        {"CN",
         {{CT::Box, 1.0, {{"x", 0}, {"y", 1}}, ""},
          {CT::Bar, 0.8, {{"x", 0}, {"y", 1}}, "mean"},
          {CT::Strip, 0.5, {{"x", 0}, {"y", 1}}, ""}}},
        {"NNN", {{CT::Scatter, 1.0, {{"x", 0}, {"y", 1}, {"size", 2}}, ""}}},
        {"TNN", {{CT::Line, 1.0, {{"x", 0}, {"y", 1}, {"color", 2}}, ""}, {CT::Scatter, 0.6, {{"x", 1}, {"y", 2}}, ""}}},
    };
    return rules;
}

inline std::string fmt(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

inline std::optional<double> method_value(const InsightCandidate& c, const std::string& method_id) {
    for (const auto& m : c.methods)
        if (m.method_id == method_id && m.shape == OutputShape::Scalar) return m.scalar;
    return std::nullopt;
}

inline std::optional<double> metadata(const InsightCandidate& c, const std::string& method_id, const std::string& key) {
    const auto it = c.method_metadata.find(method_id);
    if (it == c.method_metadata.end()) return std::nullopt;
    const auto jt = it->second.find(key);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
}

inline std::string insight_sentence(const InsightCandidate& c) {
    const auto& cols = c.combination.column_names;
    const std::string all = join(cols, ", ");
    const auto& type = c.insight_type_id;
    const std::size_t marks = c.top_points.size();
    if (type == "linear_correlation") {
        return "Pearson |r| = " + fmt(method_value(c, "pearson").value_or(0.0)) + " between " + cols[0] + " and " + cols[1];
    }
    if (type == "nonlinear_correlation") {
        return "Spearman |rho| = " + fmt(method_value(c, "spearman").value_or(0.0)) + " and normalized mutual information = " +
               fmt(method_value(c, "mutual_information").value_or(0.0)) + " between " + cols[0] + " and " + cols[1];
    }
    if (type == "categorical_association") {
        return "Cramer's V = " + fmt(method_value(c, "cramers_v").value_or(0.0)) + " between " + cols[0] + " and " + cols[1];
    }
    if (type == "group_difference") {
        return cols[1] + " differs across " + cols[0] + " groups (Kruskal-Wallis p = " +
               fmt(metadata(c, "group_difference", "p_value").value_or(1.0), 4) + ")";
    }
    if (type == "trend") {
        const double slope = metadata(c, "trend", "slope").value_or(0.0);
        return cols[1] + " trends " + (slope >= 0.0 ? "upward" : "downward") + " over " + cols[0] +
               " (R^2 = " + fmt(metadata(c, "trend", "r2").value_or(0.0)) + ", Mann-Kendall tau = " +
               fmt(metadata(c, "mann_kendall", "tau").value_or(0.0)) + ")";
    }
    if (type == "seasonality") {
        return cols[1] + " repeats with a period of about " +
               fmt(metadata(c, "seasonality", "lag").value_or(0.0), 0) + " observations (autocorrelation " +
               fmt(method_value(c, "seasonality").value_or(0.0)) + ")";
    }
    if (type == "skew") {
        const double g1 = metadata(c, "skewness", "skewness").value_or(0.0);
        return cols[0] + " is " + (g1 >= 0.0 ? "right" : "left") + "-skewed (skewness = " + fmt(g1) + ")";
    }
    if (type == "heavy_tails") {
        return cols[0] + " has heavy tails (excess kurtosis = " +
               fmt(metadata(c, "heavy_tail", "excess_kurtosis").value_or(0.0)) + ")";
    }
    if (type == "time_series_causality") {
        const bool forward = metadata(c, "granger", "direction").value_or(1.0) > 0.0;
        return "Past values of " + (forward ? cols[1] : cols[2]) + " help predict " + (forward ? cols[2] : cols[1]) +
               " over " + cols[0] + " (score " + fmt(method_value(c, "granger").value_or(0.0)) + ")";
    }
    if (type == "two_variable_outliers" && c.combination.signature == parse_signature("CC")) {
        return std::to_string(c.flagged_cells.size()) + " unusual " + cols[0] + " x " + cols[1] + " combinations";
    }
    if (type == "peaks") return std::to_string(marks) + " notable peaks in " + cols[1] + " over " + cols[0];
    return std::to_string(marks) + " most unusual points in " + all;
}

inline std::string pretty_type(const std::string& id) {
    std::string out = id;
    std::replace(out.begin(), out.end(), '_', ' ');
    if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

}  // namespace detail

// Candidate charts for an insight, best first. Weights are rule-based per
// attribute-type signature; equal weights keep table order.
inline std::vector<ChartSpec> infer_charts(const InsightCandidate& cand) {
    const auto sig = signature_string(cand.combination.signature);
    const auto& rules = detail::chart_rules();
    const auto it = rules.find(sig);
    if (it == rules.end()) throw InputError("no chart rule for signature " + sig);
    std::vector<ChartSpec> charts;
    for (const auto& rule : it->second) {
        ChartSpec spec;
        spec.chart_type = rule.type;
        spec.weight = rule.weight;
        spec.transform = rule.transform;
        for (const auto& [channel, slot] : rule.channels) spec.encodings[channel] = cand.combination.column_names.at(slot);
        spec.title = detail::pretty_type(cand.insight_type_id) + ": " + detail::join(cand.combination.column_names, " x ");
        charts.push_back(std::move(spec));
    }
    std::stable_sort(charts.begin(), charts.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
    return charts;
}

inline bool is_point_outlier_type(const std::string& type) {
    return type == "single_variable_outliers" || type == "two_variable_outliers" || type == "multivariate_outliers" ||
           type == "time_series_outliers" || type == "peaks";
}

// Adds insight-specific marks and the insight sentence to a chart.
inline ChartSpec annotate(const InsightCandidate& cand, ChartSpec spec, std::size_t max_marks = 5) {
    spec.annotations.clear();
    const auto& type = cand.insight_type_id;
    const bool categorical_pair = cand.combination.signature == parse_signature("CC");
    if (type == "two_variable_outliers" && categorical_pair) {
        for (const auto& cell : cand.flagged_cells) {
            AnnotationSpec a;
            a.kind = AnnotationKind::CellHighlight;
            a.cells.emplace_back(cell.x_category, cell.y_category);
            a.coefficients["residual"] = cell.residual;
            a.label = "residual " + detail::fmt(cell.residual);
            spec.annotations.push_back(std::move(a));
        }
    } else if (is_point_outlier_type(type)) {
        const std::size_t count = std::min(max_marks, cand.top_points.size());
        for (std::size_t k = 0; k < count; ++k) {
            const auto& p = cand.top_points[k];
            AnnotationSpec a;
            a.kind = AnnotationKind::PointHighlight;
            a.rows.push_back(p.source_row);
            a.coefficients["avg_rank"] = p.avg_rank;
            a.label = "#" + std::to_string(k + 1) + " (average rank " + detail::fmt(p.avg_rank, 1) + ")";
            spec.annotations.push_back(std::move(a));
        }
        if (type == "single_variable_outliers") {
            const auto low = detail::metadata(cand, "iqr", "fence_low");
            const auto high = detail::metadata(cand, "iqr", "fence_high");
            if (low && high) {
                AnnotationSpec band;
                band.kind = AnnotationKind::Band;
                band.coefficients = {{"low", *low}, {"high", *high}};
                band.label = "Tukey fences";
                spec.annotations.push_back(std::move(band));
            }
        }
    } else if (type == "trend") {
        const auto slope = detail::metadata(cand, "trend", "slope");
        const auto intercept = detail::metadata(cand, "trend", "intercept");
        if (slope && intercept) {
            AnnotationSpec line;
            line.kind = AnnotationKind::TrendLine;
            line.coefficients = {{"a", *slope}, {"b", *intercept}};
            line.label = "least-squares trend";
            spec.annotations.push_back(std::move(line));
        }
    }
    spec.insight_sentence = detail::insight_sentence(cand);
    return spec;
}

// Fills inline_data with the chart's columns: annotated rows first, then a
// seeded uniform sample of the remaining complete rows, capped at `cap`.
inline void attach_inline_data(ChartSpec& spec, const Dataset& ds, const CombinationSpec& combination,
                               std::uint64_t seed, std::size_t cap = kInlineRowCap) {
    std::vector<std::size_t> cols;
    for (const auto& name : combination.column_names) {
        const auto idx = ds.find_column(name);
        if (!idx) throw InputError("unknown column '" + name + "'");
        cols.push_back(*idx);
    }
    std::set<std::size_t> wanted;
    for (const auto& a : spec.annotations) wanted.insert(a.rows.begin(), a.rows.end());

    std::vector<std::size_t> pinned, rest;
    for (std::size_t r = 0; r < ds.row_count(); ++r) {
        const bool complete = std::all_of(cols.begin(), cols.end(), [&](auto c) { return ds.column(c).values[r].has_value(); });
        if (!complete) continue;
        (wanted.count(ds.source_row(r)) ? pinned : rest).push_back(r);
    }
    if (pinned.size() > cap) pinned.resize(cap);
    const std::size_t room = cap - pinned.size();
    if (rest.size() > room) {
        Rng rng(seed);
        for (std::size_t i = 0; i < room; ++i) std::swap(rest[i], rest[i + rng.below(rest.size() - i)]);
        rest.resize(room);
    }
    std::vector<std::size_t> chosen = pinned;
    chosen.insert(chosen.end(), rest.begin(), rest.end());
    std::sort(chosen.begin(), chosen.end());

    spec.inline_data = {};
    spec.inline_data.columns = combination.column_names;
    for (auto r : chosen) {
        spec.inline_data.row_ids.push_back(ds.source_row(r));
        std::vector<CellValue> row;
        for (auto c : cols) {
            const auto& col = ds.column(c);
            const double v = *col.values[r];
            switch (col.type) {
                case AttributeType::Numerical: row.emplace_back(v); break;
                case AttributeType::Temporal: row.emplace_back(format_timestamp(v)); break;
                case AttributeType::Categorical: row.emplace_back(col.categories.at(static_cast<std::size_t>(v))); break;
            }
        }
        spec.inline_data.rows.push_back(std::move(row));
    }
}

}  // namespace insight
