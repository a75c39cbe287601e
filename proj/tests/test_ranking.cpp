#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "insight/ranking.hpp"
#include "oracles.hpp"

using namespace insight;

namespace {

MethodOutput per_point(std::vector<double> v, std::string id = "m") {
    MethodOutput m;
    m.method_id = std::move(id);
    m.scores = PerPointScores{std::move(v)};
    return m;
}

MethodOutput scalar(double v, std::string id = "s") {
    MethodOutput m;
    m.method_id = std::move(id);
    m.scores = ScalarScore{v};
    return m;
}

MethodOutput subset(std::vector<std::pair<std::size_t, double>> e, std::string id = "sub") {
    MethodOutput m;
    m.method_id = std::move(id);
    m.scores = SubsetScores{std::move(e)};
    return m;
}

InsightCandidate candidate(std::string type, std::string sig, std::size_t sig_index, std::vector<std::string> cols,
                           double penalized, double group = 0.0) {
    InsightCandidate c;
    c.insight_type_id = std::move(type);
    c.combination.signature = parse_signature(sig);
    c.combination.column_names = std::move(cols);
    c.signature_index = sig_index;
    c.phi = penalized;
    c.penalized_phi = penalized;
    c.group_normalized_score = group;
    return c;
}

std::vector<double> values(const MethodOutput& m) { return std::get<PerPointScores>(m.scores).values; }

std::vector<std::string> names(const std::vector<InsightCandidate>& cs) {
    std::vector<std::string> out;
    for (const auto& c : cs) out.push_back(c.combination.column_names.front());
    return out;
}

}  // namespace

TEST(Normalize, Examples) {
    EXPECT_EQ(values(normalize_method_output(per_point({2, 4, 6}))), (std::vector<double>{0, 0.5, 1}));
    EXPECT_EQ(values(normalize_method_output(per_point({3, 3, 3}))), (std::vector<double>{0, 0, 0}));
    EXPECT_EQ(std::get<ScalarScore>(normalize_method_output(scalar(0.87)).scores).value, 0.87);
    EXPECT_THROW(normalize_method_output(scalar(1.5)), ContractError);
    const auto s = normalize_method_output(subset({{4, 10.0}, {1, 20.0}}));
    EXPECT_EQ(std::get<SubsetScores>(s.scores).entries, (std::vector<std::pair<std::size_t, double>>{{4, 0.0}, {1, 1.0}}));
}

TEST(Phi, Examples) {
    const std::vector<MethodOutput> one{scalar(0.6)};
    EXPECT_DOUBLE_EQ(aggregate_phi(one), 0.6);
    const std::vector<MethodOutput> two{per_point({0.2, 0.2}), per_point({0.4, 0.4, 0.4})};
    EXPECT_NEAR(aggregate_phi(two), 0.3, 1e-15);
    const std::vector<MethodOutput> worked{per_point({1, 1, 1, 1, 1}), per_point({0})};
    EXPECT_DOUBLE_EQ(aggregate_phi(worked), 0.5);
    const std::vector<MethodOutput> with_empty{subset({}), scalar(0.8)};
    EXPECT_DOUBLE_EQ(aggregate_phi(with_empty), 0.4);
}

TEST(Phi, StreamingSummariesMatchDirectEvaluation) {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<oracle::RawOutput> raw;
        std::vector<MethodSummary> summaries;
        const std::size_t methods = 1 + rng.below(4);
        for (std::size_t m = 0; m < methods; ++m) {
            oracle::RawOutput o;
            o.scalar = rng.uniform() < 0.3;
            const std::size_t n = o.scalar ? 1 : 1 + rng.below(50);
            for (std::size_t j = 0; j < n; ++j) o.scores.push_back(o.scalar ? rng.uniform() : rng.normal(3.0, 10.0));
            summaries.push_back(summarize(oracle::to_method_output(o, "m" + std::to_string(m))));
            raw.push_back(std::move(o));
        }
        EXPECT_NEAR(aggregate_phi(summaries), oracle::phi(raw), 1e-12);
    }
}

TEST(Phi, UniformCountsReduceToPlainAverage) {
    // With every n_i equal, averaging per method then across methods equals the
    // grand mean over all normalized scores.
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(30), methods = 1 + rng.below(5);
        std::vector<MethodOutput> normalized;
        double grand = 0.0;
        for (std::size_t m = 0; m < methods; ++m) {
            std::vector<double> v(n);
            for (double& x : v) x = rng.normal();
            normalized.push_back(normalize_method_output(per_point(v)));
            for (double x : values(normalized.back())) grand += x;
        }
        EXPECT_NEAR(aggregate_phi(normalized), grand / static_cast<double>(n * methods), 1e-12);
    }
}

TEST(Phi, MonotoneInEachNormalizedScore) {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<MethodOutput> outs{per_point({rng.uniform(), rng.uniform(), rng.uniform()}), scalar(rng.uniform())};
        const double before = aggregate_phi(outs);
        auto& v = std::get<PerPointScores>(outs[0].scores).values;
        const std::size_t j = rng.below(3);
        v[j] = std::min(1.0, v[j] + rng.uniform());
        EXPECT_GE(aggregate_phi(outs), before);
    }
}

TEST(Phi, BoundsOverRandomOutputs) {
    Rng rng(10);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<MethodSummary> s;
        for (int m = 0; m < 3; ++m) {
            std::vector<double> v(1 + rng.below(20));
            for (double& x : v) x = rng.normal(0.0, 1e3);
            s.push_back(summarize(per_point(v)));
        }
        const double phi = aggregate_phi(s);
        const double pen = complexity_penalty(phi, 2 + rng.below(3), rng.uniform(0.01, 1.0));
        EXPECT_GE(phi, 0.0);
        EXPECT_LE(phi, 1.0);
        EXPECT_GE(pen, 0.0);
        EXPECT_LE(pen, phi);
    }
}

TEST(Penalty, Examples) {
    EXPECT_DOUBLE_EQ(complexity_penalty(0.8, 2), 0.8);
    EXPECT_NEAR(complexity_penalty(0.8, 4, 0.9), 0.648, 1e-15);
    for (std::size_t a = 1; a < 6; ++a) EXPECT_DOUBLE_EQ(complexity_penalty(0.7, a, 1.0), 0.7);
    EXPECT_THROW(complexity_penalty(0.7, 3, 0.0), ConfigError);
}

TEST(GroupMinmax, Examples) {
    std::vector<InsightCandidate> cs{candidate("t", "NN", 0, {"a"}, 0.2), candidate("t", "NN", 0, {"b"}, 0.5),
                                     candidate("t", "NN", 0, {"c"}, 0.8), candidate("t", "CC", 1, {"d"}, 0.37)};
    group_minmax(cs);
    EXPECT_DOUBLE_EQ(cs[0].group_normalized_score, 0.0);
    EXPECT_DOUBLE_EQ(cs[1].group_normalized_score, 0.5);
    EXPECT_DOUBLE_EQ(cs[2].group_normalized_score, 1.0);
    EXPECT_DOUBLE_EQ(cs[3].group_normalized_score, 1.0);

    std::vector<InsightCandidate> two{candidate("t", "NN", 0, {"a"}, 0.9), candidate("t", "NN", 0, {"b"}, 0.1),
                                      candidate("t", "CN", 1, {"c"}, 0.3), candidate("t", "CN", 1, {"d"}, 0.05)};
    group_minmax(two);
    EXPECT_EQ(two[0].group_normalized_score, 1.0);
    EXPECT_EQ(two[2].group_normalized_score, 1.0);
    EXPECT_LT(two[1].group_normalized_score, 1.0);
    EXPECT_LT(two[3].group_normalized_score, 1.0);
}

TEST(GroupMinmax, GroupsAreKeyedByTypeAndSignature) {
    std::vector<InsightCandidate> cs{candidate("x", "NN", 0, {"a"}, 0.2), candidate("y", "NN", 0, {"b"}, 0.9)};
    group_minmax(cs);
    EXPECT_EQ(cs[0].group_normalized_score, 1.0);
    EXPECT_EQ(cs[1].group_normalized_score, 1.0);
}

TEST(RankInsights, TieBreakExample) {
    const auto ranked = rank_insights({candidate("t", "NN", 0, {"C"}, 0, 0.4), candidate("t", "CC", 1, {"B"}, 0, 1.0),
                                       candidate("t", "NN", 0, {"A"}, 0, 1.0)});
    EXPECT_EQ(names(ranked), (std::vector<std::string>{"A", "B", "C"}));
    EXPECT_EQ(names(rank_insights({candidate("t", "NN", 0, {"only"}, 0, 0.3)})), std::vector<std::string>{"only"});
}

TEST(RankInsights, RoundRobinAcrossSignaturesBeforeNames) {
    const auto ranked = rank_insights({candidate("t", "NN", 0, {"a"}, 0, 1.0), candidate("t", "NN", 0, {"b"}, 0, 1.0),
                                       candidate("t", "CN", 1, {"z"}, 0, 1.0), candidate("t", "CN", 1, {"y"}, 0, 1.0)});
    EXPECT_EQ(names(ranked), (std::vector<std::string>{"a", "y", "b", "z"}));
}

TEST(RankInsights, DistinctScoresMatchPlainSort) {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        auto pool = oracle::random_pool(rng, 1 + rng.below(30), 4, false);
        auto expected = pool;
        std::sort(expected.begin(), expected.end(),
                  [](const auto& a, const auto& b) { return a.group_normalized_score > b.group_normalized_score; });
        const auto ranked = rank_insights(pool);
        for (std::size_t i = 0; i < ranked.size(); ++i) EXPECT_EQ(oracle::identity(ranked[i]), oracle::identity(expected[i]));
    }
}

TEST(RankInsights, MatchesConstructiveOracleAndIgnoresInputOrder) {
    Rng rng(78);
    std::mt19937_64 shuffler(1);
    for (int trial = 0; trial < 300; ++trial) {
        auto pool = oracle::random_pool(rng, 1 + rng.below(40), 1 + rng.below(4));
        const auto expected = oracle::rank_insights(pool);
        std::vector<std::string> got;
        for (const auto& c : rank_insights(pool)) got.push_back(oracle::identity(c));
        ASSERT_EQ(got, expected);
        std::shuffle(pool.begin(), pool.end(), shuffler);
        got.clear();
        for (const auto& c : rank_insights(pool)) got.push_back(oracle::identity(c));
        ASSERT_EQ(got, expected);
    }
}

TEST(RankInsights, DiversityAfterGroupMinmax) {
    Rng rng(79);
    for (int trial = 0; trial < 200; ++trial) {
        auto pool = oracle::random_pool(rng, 1 + rng.below(40), 1 + rng.below(4), false);
        group_minmax(pool);
        EXPECT_EQ(oracle::diversity_violations(rank_insights(pool)), 0u);
    }
}

TEST(PointRanks, Examples) {
    const std::vector<MethodOutput> two{per_point({0.9, 0.5, 0.1}), per_point({0.5, 0.9, 0.1})};
    EXPECT_EQ(average_point_ranks(two, 3)->avg_rank, (std::vector<double>{1.5, 1.5, 3.0}));
    const std::vector<MethodOutput> one{per_point({0.3, 0.7, 0.5})};
    EXPECT_EQ(average_point_ranks(one, 3)->avg_rank, (std::vector<double>{3, 1, 2}));
    const std::vector<MethodOutput> tied{per_point({2, 2, 2})};
    EXPECT_EQ(average_point_ranks(tied, 3)->avg_rank, (std::vector<double>{1, 1, 1}));
    const std::vector<MethodOutput> none{scalar(0.5)};
    EXPECT_FALSE(average_point_ranks(none, 3).has_value());
}

TEST(PointRanks, SubsetRowsAbsentGetCountPlusOne) {
    const std::vector<MethodOutput> outs{subset({{2, 5.0}, {0, 1.0}}), per_point({0.1, 0.2, 0.3, 0.4})};
    const auto agg = average_point_ranks(outs, 4);
    // subset ranks: row 2 -> 1, row 0 -> 2, rows 1 and 3 -> 3.
    EXPECT_EQ(agg->avg_rank, (std::vector<double>{3.0, 3.0, 1.5, 2.0}));
    EXPECT_EQ(agg->contributing_method_ids, (std::vector<std::string>{"sub", "m"}));
}

TEST(PointRanks, MeanRankInvariant) {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(100);
        std::vector<MethodOutput> outs;
        for (std::size_t m = 0; m < 1 + rng.below(4); ++m) {
            std::vector<double> v(n);
            for (double& x : v) x = rng.uniform();
            outs.push_back(per_point(v));
        }
        const auto agg = average_point_ranks(outs, n);
        EXPECT_NEAR(mean(agg->avg_rank), (static_cast<double>(n) + 1.0) / 2.0, 1e-9);
        for (double r : agg->avg_rank) {
            EXPECT_GE(r, 1.0);
            EXPECT_LE(r, static_cast<double>(n));
        }
    }
}

TEST(InsightTypes, PsiExamples) {
    const std::vector<InsightCandidate> pool{candidate("t", "NN", 0, {"a"}, 0.2), candidate("t", "NN", 0, {"b"}, 0.4),
                                             candidate("t", "NN", 0, {"c"}, 0.6)};
    EXPECT_NEAR(score_insight_type(pool), 0.4, 1e-15);
    const std::vector<InsightCandidate> single{candidate("t", "NN", 0, {"a"}, 0.9)};
    EXPECT_DOUBLE_EQ(score_insight_type(single), 0.9);
    EXPECT_THROW(score_insight_type(std::vector<InsightCandidate>{}), InputError);
}

TEST(InsightTypes, Ordering) {
    const auto row = [](std::string id, std::size_t cat, double psi) {
        InsightTypeRow r;
        r.insight_type_id = std::move(id);
        r.catalog_index = cat;
        r.psi = psi;
        return r;
    };
    const auto ids = [](const std::vector<InsightTypeRow>& rows) {
        std::vector<std::string> out;
        for (const auto& r : rows) out.push_back(r.insight_type_id);
        return out;
    };
    EXPECT_EQ(ids(rank_insight_types({row("skew", 5, 0.2), row("outliers", 0, 0.7)})), (std::vector<std::string>{"outliers", "skew"}));
    EXPECT_EQ(ids(rank_insight_types({row("b", 3, 0.5), row("a", 1, 0.5), row("z", 2, 0.0)})), (std::vector<std::string>{"a", "b", "z"}));

    Rng rng(50);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<InsightTypeRow> rows;
        for (std::size_t i = 0; i < 1 + rng.below(13); ++i)
            rows.push_back(row("t" + std::to_string(i), i, static_cast<double>(rng.below(6)) / 5.0));
        std::shuffle(rows.begin(), rows.end(), std::mt19937_64(trial));
        const auto ranked = rank_insight_types(rows);
        EXPECT_EQ(ids(ranked), oracle::rank_insight_types(rows));
        for (std::size_t i = 1; i < ranked.size(); ++i) EXPECT_GE(ranked[i - 1].psi, ranked[i].psi);
    }
}

TEST(KendallTau, Examples) {
    EXPECT_DOUBLE_EQ(kendall_tau({1, 2, 3, 4}, {1, 2, 3, 4}), 1.0);
    EXPECT_DOUBLE_EQ(kendall_tau({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
    EXPECT_NEAR(kendall_tau({1, 2, 3}, {1, 3, 2}), 1.0 / 3.0, 1e-15);
    EXPECT_THROW(kendall_tau({1, 2}, {1, 2, 3}), InputError);
}
