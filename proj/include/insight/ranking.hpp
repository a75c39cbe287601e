#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "methods.hpp"
#include "stats.hpp"

namespace insight {

// ---------------------------------------------------------------------------
// Score normalization

// g(s) = (s - min) / (max - min) over the output's own scores; a constant
// output maps to zeros. Scalars must already lie in [0, 1].
inline MethodOutput normalize_method_output(const MethodOutput& out) {
    MethodOutput norm = out;
    const auto minmax = [](std::vector<double*> values) {
        if (values.empty()) return;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (double* v : values) {
            lo = std::min(lo, *v);
            hi = std::max(hi, *v);
        }
        for (double* v : values) *v = hi > lo ? (*v - lo) / (hi - lo) : 0.0;
    };
    std::visit(
        [&](auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PerPointScores>) {
                std::vector<double*> ptrs;
                for (auto& v : s.values) ptrs.push_back(&v);
                minmax(std::move(ptrs));
            } else if constexpr (std::is_same_v<T, SubsetScores>) {
                std::vector<double*> ptrs;
                for (auto& e : s.entries) ptrs.push_back(&e.second);
                minmax(std::move(ptrs));
            } else {
                if (!(s.value >= 0.0 && s.value <= 1.0))
                    throw ContractError("scalar score of '" + out.method_id + "' is outside [0, 1]");
            }
        },
        norm.scores);
    return norm;
}

// Single-pass O(1) summary of one method's scores. The mean of the min-max
// normalized scores equals (mean - min) / (max - min), so phi never needs the
// stored per-point scores.
struct ScoreSummary {
    std::size_t count = 0;
    double sum = 0.0;
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();

    void add(double s) {
        ++count;
        sum += s;
        min = std::min(min, s);
        max = std::max(max, s);
    }

    double normalized_mean() const {
        if (count == 0 || !(max > min)) return 0.0;
        return std::clamp((sum / static_cast<double>(count) - min) / (max - min), 0.0, 1.0);
    }
};

struct MethodSummary {
    std::string method_id;
    OutputShape shape = OutputShape::Scalar;
    ScoreSummary summary;
    double scalar = 0.0;

    // (1 / n_i) sum_j g(s)_j for this method; an empty subset counts as 0.
    double contribution() const { return shape == OutputShape::Scalar ? scalar : summary.normalized_mean(); }
};

inline MethodSummary summarize(const MethodOutput& out) {
    MethodSummary m;
    m.method_id = out.method_id;
    m.shape = out.shape();
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PerPointScores>) {
                for (double v : s.values) m.summary.add(v);
            } else if constexpr (std::is_same_v<T, SubsetScores>) {
                for (const auto& e : s.entries) m.summary.add(e.second);
            } else {
                if (!(s.value >= 0.0 && s.value <= 1.0))
                    throw ContractError("scalar score of '" + out.method_id + "' is outside [0, 1]");
                m.scalar = s.value;
                m.summary.add(s.value);
            }
        },
        out.scores);
    return m;
}

// phi = (1/|F|) sum_i (1/n_i) sum_j g(f_i)_j over already normalized outputs.
inline double aggregate_phi(std::span<const MethodOutput> normalized) {
    if (normalized.empty()) return 0.0;
    double total = 0.0;
    for (const auto& out : normalized) {
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, PerPointScores>) {
                    if (!s.values.empty()) total += mean(s.values);
                } else if constexpr (std::is_same_v<T, SubsetScores>) {
                    double sum = 0.0;
                    for (const auto& e : s.entries) sum += e.second;
                    total += sum / static_cast<double>(std::max<std::size_t>(s.entries.size(), 1));
                } else {
                    total += s.value;
                }
            },
            out.scores);
    }
    return std::clamp(total / static_cast<double>(normalized.size()), 0.0, 1.0);
}

inline double aggregate_phi(std::span<const MethodSummary> summaries) {
    if (summaries.empty()) return 0.0;
    double total = 0.0;
    for (const auto& m : summaries) total += m.contribution();
    return std::clamp(total / static_cast<double>(summaries.size()), 0.0, 1.0);
}

// phi * lambda^(arity - 2) for arity above 2.
inline double complexity_penalty(double phi, std::size_t arity, double lambda = 0.9) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("penalty_lambda must be in (0, 1]");
    if (arity <= 2) return phi;
    return phi * std::pow(lambda, static_cast<double>(arity - 2));
}

// ---------------------------------------------------------------------------
// Per-point rank aggregation

struct PointRankAggregate {
    std::vector<double> avg_rank;  // indexed by combination row
    std::vector<std::string> contributing_method_ids;
};

// R_j = mean over point-level methods of the competition rank of row j (rank
// 1 = highest score). Rows missing from a subset output get rank n_i + 1.
inline std::optional<PointRankAggregate> average_point_ranks(std::span<const MethodOutput> outputs, std::size_t rows) {
    PointRankAggregate agg;
    agg.avg_rank.assign(rows, 0.0);
    std::size_t methods = 0;
    for (const auto& out : outputs) {
        if (const auto* pp = std::get_if<PerPointScores>(&out.scores)) {
            if (pp->values.size() != rows) throw ContractError("per-point output length mismatch");
            const auto ranks = competition_ranks_desc(pp->values);
            for (std::size_t j = 0; j < rows; ++j) agg.avg_rank[j] += ranks[j];
        } else if (const auto* ss = std::get_if<SubsetScores>(&out.scores)) {
            std::vector<double> scores;
            for (const auto& e : ss->entries) scores.push_back(e.second);
            const auto ranks = competition_ranks_desc(scores);
            const double absent = static_cast<double>(ss->entries.size() + 1);
            std::vector<double> per_row(rows, absent);
            for (std::size_t k = 0; k < ss->entries.size(); ++k) {
                if (ss->entries[k].first >= rows) throw ContractError("subset row out of range");
                per_row[ss->entries[k].first] = ranks[k];
            }
            for (std::size_t j = 0; j < rows; ++j) agg.avg_rank[j] += per_row[j];
        } else {
            continue;
        }
        ++methods;
        agg.contributing_method_ids.push_back(out.method_id);
    }
    if (methods == 0) return std::nullopt;
    for (double& r : agg.avg_rank) r /= static_cast<double>(methods);
    return agg;
}

// ---------------------------------------------------------------------------
// Candidates and rows

struct RankedPoint {
    std::size_t row = 0;         // dataset row position
    std::size_t source_row = 0;  // row id in the ingested file
    double avg_rank = 0.0;
};

struct CellMark {
    std::string x_category;
    std::string y_category;
    double residual = 0.0;
};

struct InsightCandidate {
    std::string insight_type_id;
    CombinationSpec combination;
    std::size_t signature_index = 0;  // position of the signature in the type's catalog entry
    std::size_t row_count = 0;
    std::vector<MethodSummary> methods;
    std::map<std::string, std::map<std::string, double>> method_metadata;
    std::vector<CellMark> flagged_cells;
    // Best rows by average rank, kept for annotation.
    std::vector<RankedPoint> top_points;
    double phi = 0.0;
    double penalized_phi = 0.0;
    double group_normalized_score = 0.0;
};

// Min-max of penalized_phi within each (insight type, signature) group. A
// singleton or constant group maps every member to 1.
inline void group_minmax(std::vector<InsightCandidate>& candidates) {
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> ranges;
    for (const auto& c : candidates) {
        const auto key = std::make_pair(c.insight_type_id, signature_string(c.combination.signature));
        auto [it, inserted] = ranges.try_emplace(key, c.penalized_phi, c.penalized_phi);
        if (!inserted) {
            it->second.first = std::min(it->second.first, c.penalized_phi);
            it->second.second = std::max(it->second.second, c.penalized_phi);
        }
    }
    for (auto& c : candidates) {
        const auto [lo, hi] = ranges.at({c.insight_type_id, signature_string(c.combination.signature)});
        c.group_normalized_score = hi > lo ? (c.penalized_phi - lo) / (hi - lo) : 1.0;
    }
}

// Orders one insight type's candidates by group-normalized score, descending.
// Equal scores are interleaved round-robin across signatures (in catalog
// order), then ordered by column names, so ties never depend on input order.
inline std::vector<InsightCandidate> rank_insights(std::vector<InsightCandidate> candidates) {
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        return std::tie(a.signature_index, a.combination.column_names) <
               std::tie(b.signature_index, b.combination.column_names);
    });
    // Ordinal of each candidate among equal-score members of its signature.
    std::vector<std::size_t> ordinal(candidates.size(), 0);
    std::map<std::pair<std::size_t, double>, std::size_t> seen;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        ordinal[i] = seen[{candidates[i].signature_index, candidates[i].group_normalized_score}]++;

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ca = candidates[a];
        const auto& cb = candidates[b];
        if (ca.group_normalized_score != cb.group_normalized_score)
            return ca.group_normalized_score > cb.group_normalized_score;
        return std::tie(ordinal[a], ca.signature_index, ca.combination.column_names) <
               std::tie(ordinal[b], cb.signature_index, cb.combination.column_names);
    });
    std::vector<InsightCandidate> ranked;
    ranked.reserve(candidates.size());
    for (auto i : order) ranked.push_back(std::move(candidates[i]));
    return ranked;
}

// Psi(I): mean penalized phi over the type's candidate pool.
inline double score_insight_type(std::span<const InsightCandidate> pool) {
    if (pool.empty()) throw InputError("empty candidate pool");
    double total = 0.0;
    for (const auto& c : pool) total += c.penalized_phi;
    return total / static_cast<double>(pool.size());
}

struct InsightTypeRow {
    std::string insight_type_id;
    std::string display_name;
    std::size_t catalog_index = 0;
    double psi = 0.0;
    std::vector<InsightCandidate> ranked_candidates;
    std::size_t candidate_pool_size = 0;
};

// Orders rows by psi, descending; equal psi keeps catalog order.
inline std::vector<InsightTypeRow> rank_insight_types(std::vector<InsightTypeRow> rows) {
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (a.psi != b.psi) return a.psi > b.psi;
        return a.catalog_index < b.catalog_index;
    });
    return rows;
}

// Kendall tau-a between two rankings of the same items without ties.
template <typename T>
double kendall_tau(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw InputError("rankings differ in length");
    if (a.size() < 2) throw InputError("rankings need at least 2 items");
    const auto sign = [](T x, T y) { return (x > y) - (x < y); };
    long long concordant = 0, discordant = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const int s = sign(a[i], a[j]) * sign(b[i], b[j]);
            if (s > 0) ++concordant;
            else if (s < 0) ++discordant;
        }
    }
    const double pairs = static_cast<double>(a.size()) * static_cast<double>(a.size() - 1) / 2.0;
    return static_cast<double>(concordant - discordant) / pairs;
}

inline double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
    return kendall_tau<double>(std::span<const double>(a), std::span<const double>(b));
}

}  // namespace insight
