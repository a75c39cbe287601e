#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <exception>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "dataset.hpp"
#include "error.hpp"
#include "methods.hpp"
#include "ranking.hpp"
#include "stats.hpp"
#include "vizrec.hpp"

namespace insight {

struct EngineConfig {
    IngestConfig ingest;
    std::size_t top_r = 10;
    std::size_t top_k = 5;
    double penalty_lambda = 0.9;
    std::size_t threads = 0;  // 0 = hardware concurrency
    std::size_t max_marks = 5;
    nlohmann::json methods = nlohmann::json::object();

    static EngineConfig from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        EngineConfig c;
        const auto count = [&](const std::string& key, std::size_t& dst, std::size_t lo) {
            const auto& v = j.at(key);
            if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(lo))
                throw ConfigError("\"" + key + "\" must be an integer >= " + std::to_string(lo));
            dst = v.get<std::size_t>();
        };
        for (const auto& [key, value] : j.items()) {
            if (key == "max_rows") count(key, c.ingest.max_rows, 100);
            else if (key == "seed") {
                if (!value.is_number_integer()) throw ConfigError("\"seed\" must be an integer");
                c.ingest.seed = value.is_number_unsigned() ? value.get<std::uint64_t>()
                                                           : static_cast<std::uint64_t>(value.get<long long>());
            } else if (key == "cardinality_cap") count(key, c.ingest.cardinality_cap, 2);
            else if (key == "combination_cap") count(key, c.ingest.combination_cap, 1);
            else if (key == "min_rows") count(key, c.ingest.min_rows, 2);
            else if (key == "top_r") count(key, c.top_r, 1);
            else if (key == "top_k") count(key, c.top_k, 1);
            else if (key == "threads") count(key, c.threads, 0);
            else if (key == "max_marks") count(key, c.max_marks, 0);
            else if (key == "penalty_lambda") {
                if (!value.is_number()) throw ConfigError("\"penalty_lambda\" must be a number");
                c.penalty_lambda = value.get<double>();
                if (!(c.penalty_lambda > 0.0 && c.penalty_lambda <= 1.0))
                    throw ConfigError("penalty_lambda must be in (0, 1]");
            } else if (key == "methods") {
                MethodRegistry::standard().apply_overrides(value);  // validate early
                c.methods = value;
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
        return c;
    }

    // Everything that can change the output. Thread count is left out on
    // purpose: results do not depend on it.
    nlohmann::json to_json() const {
        return {{"max_rows", ingest.max_rows},
                {"seed", ingest.seed},
                {"cardinality_cap", ingest.cardinality_cap},
                {"combination_cap", ingest.combination_cap},
                {"min_rows", ingest.min_rows},
                {"top_r", top_r},
                {"top_k", top_k},
                {"penalty_lambda", penalty_lambda},
                {"max_marks", max_marks},
                {"methods", methods}};
    }

    std::string fingerprint() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json().dump())));
        return buf;
    }
};

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view type, std::string_view combination,
                                 std::string_view method) {
    std::uint64_t h = fnv1a(std::to_string(seed));
    for (auto part : {type, combination, method}) h = fnv1a(part, fnv1a("|", h));
    return h;
}

// The scored candidate pool of one dataset. Immutable once built, so filtered
// recommendations can be computed concurrently without re-running detectors.
struct AnalysisContext {
    std::shared_ptr<const Dataset> dataset;
    EngineConfig config;
    MethodRegistry registry;
    std::vector<InsightCandidate> pool;  // catalog order, then enumeration order
};

struct RecommendedInsight {
    InsightCandidate candidate;
    ChartSpec chart;                     // rank-1, annotated, with inline data
    std::vector<ChartSpec> alternatives;  // lower-weight charts, no inline data
};

struct RecommendationRow {
    std::string insight_type_id;
    std::string display_name;
    std::size_t catalog_index = 0;
    double psi = 0.0;
    std::size_t pool_size = 0;
    std::vector<RecommendedInsight> insights;
};

struct Recommendations {
    std::string dataset_name;
    std::string config_fingerprint;
    std::size_t top_r = 0;
    std::size_t top_k = 0;
    std::vector<std::string> attributes;
    std::vector<RecommendationRow> rows;

    bool empty() const { return rows.empty(); }
};

namespace detail {

inline std::string category_name(const Column& col, double id) {
    const auto i = static_cast<std::size_t>(id);
    return i < col.categories.size() ? col.categories[i] : std::to_string(i);
}

inline std::optional<InsightCandidate> score_combination(const Dataset& ds, const InsightType& type,
                                                         std::size_t signature_index, const CombinationMatrix& x,
                                                         const EngineConfig& cfg) {
    const auto& entry = type.entries[signature_index];
    InsightCandidate cand;
    cand.insight_type_id = type.id;
    cand.combination = x.spec;
    cand.signature_index = signature_index;
    cand.row_count = x.row_count();

    std::vector<MethodOutput> point_level;
    const auto key = x.spec.key();
    for (const auto& method : entry.methods) {
        MethodOutput out;
        try {
            out = run_method(method, x, derive_seed(cfg.ingest.seed, type.id, key, method.id));
        } catch (const PreconditionError&) {
            continue;
        }
        cand.methods.push_back(summarize(out));
        if (!out.metadata.empty()) cand.method_metadata[method.id] = out.metadata;
        for (const auto& cell : out.flagged_cells) {
            cand.flagged_cells.push_back({category_name(ds.column(x.column_indices[0]), cell.x_category),
                                          category_name(ds.column(x.column_indices[1]), cell.y_category),
                                          cell.residual});
        }
        if (out.shape() != OutputShape::Scalar) point_level.push_back(std::move(out));
    }
    if (cand.methods.empty()) return std::nullopt;

    cand.phi = aggregate_phi(std::span<const MethodSummary>(cand.methods));
    cand.penalized_phi = complexity_penalty(cand.phi, x.arity(), cfg.penalty_lambda);

    if (const auto agg = average_point_ranks(point_level, x.row_count())) {
        std::vector<std::size_t> order(x.row_count());
        std::iota(order.begin(), order.end(), 0);
        const std::size_t keep = std::min(cfg.max_marks, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (agg->avg_rank[a] != agg->avg_rank[b]) return agg->avg_rank[a] < agg->avg_rank[b];
                              return a < b;
                          });
        for (std::size_t k = 0; k < keep; ++k) {
            const std::size_t pos = x.rows[order[k]];
            cand.top_points.push_back({pos, ds.source_row(pos), agg->avg_rank[order[k]]});
        }
    }
    return cand;
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, std::max<std::size_t>(count, 1));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

// Samples, enumerates combinations and scores every candidate. Tasks write
// into pre-allocated slots, so the pool is identical for any thread count.
inline AnalysisContext build_context(const Dataset& input, const EngineConfig& cfg) {
    AnalysisContext ctx;
    ctx.config = cfg;
    ctx.registry = MethodRegistry::standard();
    ctx.registry.apply_overrides(cfg.methods);
    ctx.dataset = std::make_shared<const Dataset>(sample_rows(input, cfg.ingest.max_rows, cfg.ingest.seed));
    const Dataset& ds = *ctx.dataset;

    std::map<Signature, std::vector<CombinationMatrix>> combos;
    struct Task {
        const InsightType* type;
        std::size_t signature_index;
        const CombinationMatrix* matrix;
    };
    for (const auto& type : ctx.registry.types())
        for (const auto& entry : type.entries)
            if (!combos.count(entry.signature))
                combos[entry.signature] =
                    enumerate_combinations(ds, entry.signature, cfg.ingest.combination_cap, cfg.ingest.min_rows);
    std::vector<Task> tasks;
    for (const auto& type : ctx.registry.types())
        for (std::size_t s = 0; s < type.entries.size(); ++s)
            for (const auto& m : combos.at(type.entries[s].signature)) tasks.push_back({&type, s, &m});

    std::vector<std::optional<InsightCandidate>> slots(tasks.size());
    detail::parallel_for(tasks.size(), cfg.threads, [&](std::size_t i) {
        slots[i] = detail::score_combination(ds, *tasks[i].type, tasks[i].signature_index, *tasks[i].matrix, cfg);
    });
    for (auto& s : slots)
        if (s) ctx.pool.push_back(std::move(*s));
    return ctx;
}

// Ranks the cached pool, keeping only candidates whose combination contains
// every requested attribute. Never re-runs a detector.
inline Recommendations recommend(const AnalysisContext& ctx, const std::vector<std::string>& attributes,
                                 std::size_t top_r, std::size_t top_k) {
    const Dataset& ds = *ctx.dataset;
    for (const auto& a : attributes)
        if (!ds.find_column(a)) throw InputError("unknown attribute '" + a + "'");
    if (top_r == 0 || top_k == 0) throw ConfigError("top_r and top_k must be positive");

    std::map<std::string, std::vector<InsightCandidate>> pools;
    for (const auto& c : ctx.pool) {
        const auto& names = c.combination.column_names;
        const bool keep = std::all_of(attributes.begin(), attributes.end(), [&](const auto& a) {
            return std::find(names.begin(), names.end(), a) != names.end();
        });
        if (keep) pools[c.insight_type_id].push_back(c);
    }

    std::vector<InsightTypeRow> rows;
    for (const auto& type : ctx.registry.types()) {
        auto it = pools.find(type.id);
        if (it == pools.end() || it->second.empty()) continue;
        InsightTypeRow row;
        row.insight_type_id = type.id;
        row.display_name = type.display_name;
        row.catalog_index = ctx.registry.catalog_index(type.id);
        row.candidate_pool_size = it->second.size();
        row.psi = score_insight_type(it->second);
        group_minmax(it->second);
        row.ranked_candidates = rank_insights(std::move(it->second));
        rows.push_back(std::move(row));
    }
    rows = rank_insight_types(std::move(rows));
    if (rows.size() > top_r) rows.resize(top_r);

    Recommendations recs;
    recs.dataset_name = ds.name();
    recs.config_fingerprint = ctx.config.fingerprint();
    recs.top_r = top_r;
    recs.top_k = top_k;
    recs.attributes = attributes;
    for (auto& row : rows) {
        RecommendationRow out;
        out.insight_type_id = row.insight_type_id;
        out.display_name = row.display_name;
        out.catalog_index = row.catalog_index;
        out.psi = row.psi;
        out.pool_size = row.candidate_pool_size;
        const std::size_t k = std::min(top_k, row.ranked_candidates.size());
        for (std::size_t i = 0; i < k; ++i) {
            RecommendedInsight insight;
            insight.candidate = std::move(row.ranked_candidates[i]);
            const auto& cand = insight.candidate;
            auto charts = infer_charts(cand);
            insight.chart = annotate(cand, charts.front(), ctx.config.max_marks);
            attach_inline_data(insight.chart, ds, cand.combination,
                               derive_seed(ctx.config.ingest.seed, cand.insight_type_id, cand.combination.key(), "chart"));
            for (std::size_t c = 1; c < charts.size(); ++c)
                insight.alternatives.push_back(annotate(cand, charts[c], ctx.config.max_marks));
            out.insights.push_back(std::move(insight));
        }
        recs.rows.push_back(std::move(out));
    }
    return recs;
}

inline Recommendations analyze(const Dataset& ds, const EngineConfig& cfg) {
    return recommend(build_context(ds, cfg), {}, cfg.top_r, cfg.top_k);
}

}  // namespace insight
