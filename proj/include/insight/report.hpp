#pragma once

#include <cstdio>
#include <sstream>
#include <string>

#include "json.hpp"

#include "dataset.hpp"
#include "engine.hpp"
#include "vizrec.hpp"

namespace insight {

namespace detail {

// Fixed-precision rounding keeps serialized output stable across platforms.
inline double round_for_output(double v) {
    if (!std::isfinite(v)) return 0.0;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::strtod(buf, nullptr);
}

}  // namespace detail

inline nlohmann::json to_json(const CombinationSpec& spec) {
    return {{"signature", signature_string(spec.signature)}, {"columns", spec.column_names}};
}

inline nlohmann::json to_json(const AnnotationSpec& a) {
    nlohmann::json j{{"kind", to_string(a.kind)}, {"label", a.label}};
    nlohmann::json target = nlohmann::json::object();
    if (!a.rows.empty()) target["rows"] = a.rows;
    if (!a.cells.empty()) {
        target["cells"] = nlohmann::json::array();
        for (const auto& [x, y] : a.cells) target["cells"].push_back({{"x", x}, {"y", y}});
    }
    for (const auto& [k, v] : a.coefficients) target[k] = detail::round_for_output(v);
    j["target"] = std::move(target);
    return j;
}

inline nlohmann::json to_json(const ChartSpec& c, bool with_data = true) {
    nlohmann::json j{{"chart_type", to_string(c.chart_type)},
                     {"weight", c.weight},
                     {"encodings", c.encodings},
                     {"title", c.title},
                     {"insight_sentence", c.insight_sentence}};
    if (!c.transform.empty()) j["transform"] = c.transform;
    j["annotations"] = nlohmann::json::array();
    for (const auto& a : c.annotations) j["annotations"].push_back(to_json(a));
    if (with_data) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : c.inline_data.rows) {
            nlohmann::json r = nlohmann::json::array();
            for (const auto& cell : row) {
                if (const auto* d = std::get_if<double>(&cell)) r.push_back(detail::round_for_output(*d));
                else r.push_back(std::get<std::string>(cell));
            }
            rows.push_back(std::move(r));
        }
        j["inline_data"] = {{"columns", c.inline_data.columns}, {"row_ids", c.inline_data.row_ids}, {"rows", std::move(rows)}};
    }
    return j;
}

inline nlohmann::json to_json(const RecommendedInsight& insight) {
    const auto& c = insight.candidate;
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& m : c.methods) {
        nlohmann::json mj{{"method_id", m.method_id}, {"shape", to_string(m.shape)},
                          {"score", detail::round_for_output(m.contribution())}, {"count", m.summary.count}};
        const auto it = c.method_metadata.find(m.method_id);
        if (it != c.method_metadata.end()) {
            nlohmann::json meta = nlohmann::json::object();
            for (const auto& [k, v] : it->second) meta[k] = detail::round_for_output(v);
            mj["metadata"] = std::move(meta);
        }
        methods.push_back(std::move(mj));
    }
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : c.top_points) points.push_back({{"row_id", p.source_row}, {"avg_rank", detail::round_for_output(p.avg_rank)}});
    nlohmann::json alternatives = nlohmann::json::array();
    for (const auto& a : insight.alternatives) alternatives.push_back(to_json(a, false));
    return {{"combination", to_json(c.combination)},
            {"row_count", c.row_count},
            {"phi", detail::round_for_output(c.phi)},
            {"penalized_phi", detail::round_for_output(c.penalized_phi)},
            {"score", detail::round_for_output(c.group_normalized_score)},
            {"methods", std::move(methods)},
            {"top_points", std::move(points)},
            {"chart", to_json(insight.chart)},
            {"annotations", to_json(insight.chart)["annotations"]},
            {"alternatives", std::move(alternatives)}};
}

inline nlohmann::json to_json(const Recommendations& recs) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : recs.rows) {
        nlohmann::json insights = nlohmann::json::array();
        for (const auto& i : row.insights) insights.push_back(to_json(i));
        rows.push_back({{"insight_type", row.insight_type_id},
                        {"display_name", row.display_name},
                        {"psi", detail::round_for_output(row.psi)},
                        {"pool_size", row.pool_size},
                        {"insights", std::move(insights)}});
    }
    return {{"dataset", recs.dataset_name},
            {"config_fingerprint", recs.config_fingerprint},
            {"top_r", recs.top_r},
            {"top_k", recs.top_k},
            {"attributes", recs.attributes},
            {"empty", recs.empty()},
            {"rows", std::move(rows)}};
}

inline nlohmann::json schema_json(const Dataset& ds) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : ds.columns()) {
        cols.push_back({{"name", c.name},
                        {"type", std::string(1, type_letter(c.type))},
                        {"excluded", c.excluded},
                        {"null_fraction", detail::round_for_output(c.null_fraction())}});
    }
    return {{"name", ds.name()}, {"row_count", ds.row_count()}, {"columns", std::move(cols)}};
}

namespace detail {

inline std::string md_cell(std::string text) {
    std::string out;
    for (char c : text) {
        if (c == '|') out += '\\';
        out += c == '\n' ? ' ' : c;
    }
    return out;
}

}  // namespace detail

// Markdown rendering; sections follow the JSON row order exactly.
inline std::string to_markdown(const Recommendations& recs) {
    std::ostringstream out;
    const auto num = [](double v) { return detail::fmt(v, 3); };
    out << "# Insights for " << recs.dataset_name << "\n\n";
    out << "Config fingerprint `" << recs.config_fingerprint << "`, top " << recs.top_r << " insight types, top "
        << recs.top_k << " insights each";
    if (!recs.attributes.empty()) out << ", filtered on " << detail::join(recs.attributes, ", ");
    out << ".\n\n";
    if (recs.empty()) {
        out << "_No insights: no combination of columns could be scored._\n";
        return out.str();
    }
    std::size_t rank = 0;
    for (const auto& row : recs.rows) {
        out << "## " << ++rank << ". " << row.display_name << " (psi " << num(row.psi) << ", pool of " << row.pool_size
            << ")\n\n";
        out << "| # | Columns | phi | penalized | score | chart | insight |\n";
        out << "|---|---|---|---|---|---|---|\n";
        std::size_t i = 0;
        for (const auto& ins : row.insights) {
            const auto& c = ins.candidate;
            out << "| " << ++i << " | " << detail::md_cell(detail::join(c.combination.column_names, ", ")) << " | " << num(c.phi) << " | "
                << num(c.penalized_phi) << " | " << num(c.group_normalized_score) << " | "
                << to_string(ins.chart.chart_type) << " | " << detail::md_cell(ins.chart.insight_sentence) << " |\n";
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace insight
