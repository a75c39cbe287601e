#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "dataset.hpp"
#include "detectors/association.hpp"
#include "detectors/distribution.hpp"
#include "detectors/outliers.hpp"
#include "detectors/timeseries.hpp"
#include "error.hpp"

namespace insight {

enum class MethodClass { Statistical, InfoTheoretic, Supervised, Unsupervised };
enum class OutputShape { PerPoint, Subset, Scalar };

inline const char* to_string(MethodClass c) {
    switch (c) {
        case MethodClass::Statistical: return "statistical";
        case MethodClass::InfoTheoretic: return "info_theoretic";
        case MethodClass::Supervised: return "supervised";
        case MethodClass::Unsupervised: return "unsupervised";
    }
    return "?";
}

inline const char* to_string(OutputShape s) {
    switch (s) {
        case OutputShape::PerPoint: return "per_point";
        case OutputShape::Subset: return "subset";
        case OutputShape::Scalar: return "scalar";
    }
    return "?";
}

using ParamValue = std::variant<double, std::string>;
using Hyperparameters = std::map<std::string, ParamValue>;

struct MethodSpec {
    std::string id;        // unique within its (insight type, signature) entry
    std::string detector;  // algorithm id shared by every instance of the algorithm
    std::string insight_type;
    Signature signature;
    MethodClass method_class = MethodClass::Statistical;
    Hyperparameters hyperparameters;
    OutputShape output_shape = OutputShape::Scalar;

    double number(const std::string& key) const { return std::get<double>(hyperparameters.at(key)); }
    std::size_t integer(const std::string& key) const { return static_cast<std::size_t>(number(key)); }
    const std::string& text(const std::string& key) const { return std::get<std::string>(hyperparameters.at(key)); }
};

struct PerPointScores {
    std::vector<double> values;
};
struct SubsetScores {
    std::vector<std::pair<std::size_t, double>> entries;  // (combination row, score)
};
struct ScalarScore {
    double value = 0.0;
};
using RawScores = std::variant<PerPointScores, SubsetScores, ScalarScore>;

struct MethodOutput {
    std::string method_id;
    RawScores scores;
    // Every method is oriented so that larger means more insightful.
    bool higher_is_more_insightful = true;
    std::map<std::string, double> metadata;
    std::vector<detectors::FlaggedCell> flagged_cells;

    OutputShape shape() const { return static_cast<OutputShape>(scores.index()); }
};

// ---------------------------------------------------------------------------
// Hyperparameter schemas

struct ParamRule {
    std::string name;
    ParamValue fallback;
    double min = -std::numeric_limits<double>::infinity();
    double max = std::numeric_limits<double>::infinity();
    bool integer = false;
    std::vector<std::string> choices;  // non-empty for text parameters
};

inline const std::map<std::string, std::vector<ParamRule>>& parameter_schemas() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    static const std::map<std::string, std::vector<ParamRule>> schemas = {
        {"iqr", {{"k", 1.5, 0.0, inf}}},
        {"zscore", {}},
        {"dbscan", {{"eps", 0.0, 0.0, inf}, {"min_pts", 0.0, 0.0, inf, true}, {"eps_quantile", 0.95, 0.5, 1.0}}},
        {"isolation_forest", {{"n_trees", 100.0, 2.0, inf, true}, {"subsample", 256.0, 2.0, inf, true}}},
        {"mahalanobis", {{"ridge", 1e-6, 0.0, 1.0}}},
        {"kmeans_distance", {{"k", 3.0, 1.0, inf, true}, {"iterations", 50.0, 1.0, inf, true}}},
        {"kernel_mean_distance",
         {{"kernel", std::string("rbf"), 0, 0, false, {"linear", "rbf", "polynomial"}},
          {"gamma", 0.0, 0.0, inf},
          {"degree", 2.0, 1.0, 10.0, true},
          {"coef0", 1.0},
          {"reference_size", 1000.0, 10.0, inf, true}}},
        {"pearson", {}},
        {"spearman", {}},
        {"mutual_information", {{"bins", 10.0, 2.0, 1000.0, true}}},
        {"skewness", {}},
        {"heavy_tail", {}},
        {"trend", {}},
        {"mann_kendall", {}},
        {"rolling_residual", {{"window", 7.0, 3.0, inf, true}}},
        {"peaks", {{"window", 3.0, 1.0, inf, true}, {"threshold", 1.0}}},
        {"seasonality", {{"min_lag", 2.0, 1.0, inf, true}}},
        {"granger", {{"lag", 2.0, 1.0, 50.0, true}}},
        {"cramers_v", {}},
        {"chisq_residual", {{"threshold", 2.0, 0.0, inf}}},
        {"group_difference", {}},
    };
    return schemas;
}

// Fills defaults and checks every value against the detector's schema.
inline Hyperparameters validate_hyperparameters(const std::string& detector, const Hyperparameters& given) {
    const auto& schemas = parameter_schemas();
    const auto it = schemas.find(detector);
    if (it == schemas.end()) throw ConfigError("unknown method '" + detector + "'");
    Hyperparameters out;
    for (const auto& rule : it->second) out[rule.name] = rule.fallback;
    for (const auto& [key, value] : given) {
        const auto rule = std::find_if(it->second.begin(), it->second.end(), [&](const auto& r) { return r.name == key; });
        if (rule == it->second.end()) throw ConfigError("method '" + detector + "' has no parameter '" + key + "'");
        if (!rule->choices.empty()) {
            const auto* text = std::get_if<std::string>(&value);
            if (!text || std::find(rule->choices.begin(), rule->choices.end(), *text) == rule->choices.end())
                throw ConfigError("parameter '" + key + "' of '" + detector + "' has an unsupported value");
        } else {
            const auto* number = std::get_if<double>(&value);
            if (!number || !std::isfinite(*number)) throw ConfigError("parameter '" + key + "' of '" + detector + "' must be a number");
            if (*number < rule->min || *number > rule->max)
                throw ConfigError("parameter '" + key + "' of '" + detector + "' is out of range");
            if (rule->integer && std::floor(*number) != *number)
                throw ConfigError("parameter '" + key + "' of '" + detector + "' must be an integer");
        }
        out[key] = value;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Catalog

struct SignatureMethods {
    Signature signature;
    std::vector<MethodSpec> methods;
};

struct InsightType {
    std::string id;
    std::string display_name;
    std::vector<SignatureMethods> entries;

    std::vector<Signature> signatures() const {
        std::vector<Signature> out;
        for (const auto& e : entries) out.push_back(e.signature);
        return out;
    }

    std::size_t signature_index(const Signature& sig) const {
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (entries[i].signature == sig) return i;
        return entries.size();
    }
};

class MethodRegistry {
public:
    // The built-in catalog of 14 insight types.
    static MethodRegistry standard() {
        using MC = MethodClass;
        using OS = OutputShape;
        MethodRegistry reg;
        auto add = [&](std::string id, std::string name) -> InsightType& {
            reg.types_.push_back(InsightType{std::move(id), std::move(name), {}});
            return reg.types_.back();
        };
        auto entry = [](InsightType& type, const char* sig,
                        std::vector<std::tuple<std::string, std::string, MC, OS, Hyperparameters>> methods) {
            SignatureMethods e{parse_signature(sig), {}};
            for (auto& [id, detector, cls, shape, params] : methods)
                e.methods.push_back(MethodSpec{id, detector, type.id, e.signature, cls, params, shape});
            type.entries.push_back(std::move(e));
        };

        auto& single = add("single_variable_outliers", "Single-variable outliers");
        entry(single, "N", {{"iqr", "iqr", MC::Statistical, OS::PerPoint, {}},
                            {"zscore", "zscore", MC::Statistical, OS::PerPoint, {}}});

        auto& two = add("two_variable_outliers", "Two-variable outliers");
        entry(two, "NN", {{"dbscan", "dbscan", MC::Unsupervised, OS::PerPoint, {}},
                          {"isolation_forest", "isolation_forest", MC::Unsupervised, OS::PerPoint, {}}});
        entry(two, "CC", {{"chisq_residual", "chisq_residual", MC::Statistical, OS::Subset, {}}});

        auto& multi = add("multivariate_outliers", "Multivariate outliers");
        entry(multi, "NNN",
              {{"isolation_forest", "isolation_forest", MC::Unsupervised, OS::PerPoint, {}},
               {"mahalanobis", "mahalanobis", MC::Statistical, OS::PerPoint, {}},
               {"kmeans_distance", "kmeans_distance", MC::Unsupervised, OS::PerPoint, {}},
               {"kernel_mean_distance:linear", "kernel_mean_distance", MC::Unsupervised, OS::PerPoint,
                {{"kernel", std::string("linear")}}},
               {"kernel_mean_distance:rbf", "kernel_mean_distance", MC::Unsupervised, OS::PerPoint,
                {{"kernel", std::string("rbf")}}},
               {"kernel_mean_distance:polynomial", "kernel_mean_distance", MC::Unsupervised, OS::PerPoint,
                {{"kernel", std::string("polynomial")}}}});

        auto& ts = add("time_series_outliers", "Time-series outliers");
        entry(ts, "TN", {{"rolling_residual", "rolling_residual", MC::Statistical, OS::PerPoint, {}}});
        entry(ts, "TNC", {{"rolling_residual", "rolling_residual", MC::Statistical, OS::PerPoint, {}}});

        auto& peaks = add("peaks", "Peaks");
        entry(peaks, "TN", {{"peaks", "peaks", MC::Statistical, OS::Subset, {}}});

        auto& trend = add("trend", "Trend");
        entry(trend, "TN", {{"trend", "trend", MC::Supervised, OS::Scalar, {}},
                            {"mann_kendall", "mann_kendall", MC::Statistical, OS::Scalar, {}}});

        auto& season = add("seasonality", "Seasonality");
        entry(season, "TN", {{"seasonality", "seasonality", MC::Statistical, OS::Scalar, {}}});

        auto& linear = add("linear_correlation", "Linear correlation");
        entry(linear, "NN", {{"pearson", "pearson", MC::Statistical, OS::Scalar, {}}});

        auto& nonlinear = add("nonlinear_correlation", "Nonlinear correlation");
        entry(nonlinear, "NN", {{"spearman", "spearman", MC::Statistical, OS::Scalar, {}},
                                {"mutual_information", "mutual_information", MC::InfoTheoretic, OS::Scalar, {}}});

        auto& assoc = add("categorical_association", "Categorical association");
        entry(assoc, "CC", {{"cramers_v", "cramers_v", MC::Statistical, OS::Scalar, {}},
                            {"mutual_information", "mutual_information", MC::InfoTheoretic, OS::Scalar, {}}});

        auto& group = add("group_difference", "Group difference");
        entry(group, "CN", {{"group_difference", "group_difference", MC::Statistical, OS::Scalar, {}},
                            {"mutual_information", "mutual_information", MC::InfoTheoretic, OS::Scalar, {}}});

        auto& skew = add("skew", "Skew");
        entry(skew, "N", {{"skewness", "skewness", MC::Statistical, OS::Scalar, {}}});

        auto& tails = add("heavy_tails", "Heavy tails");
        entry(tails, "N", {{"heavy_tail", "heavy_tail", MC::Statistical, OS::Scalar, {}}});

        auto& causal = add("time_series_causality", "Time-series causality");
        entry(causal, "TNN", {{"granger", "granger", MC::Supervised, OS::Scalar, {}}});

        for (auto& type : reg.types_)
            for (auto& e : type.entries)
                for (auto& m : e.methods) m.hyperparameters = validate_hyperparameters(m.detector, m.hyperparameters);
        return reg;
    }

    const std::vector<InsightType>& types() const { return types_; }

    const InsightType* find(std::string_view id) const {
        for (const auto& t : types_)
            if (t.id == id) return &t;
        return nullptr;
    }

    // Position in catalog order; used as the insight-type tie-break.
    std::size_t catalog_index(std::string_view id) const {
        for (std::size_t i = 0; i < types_.size(); ++i)
            if (types_[i].id == id) return i;
        return types_.size();
    }

    // Applies {"method id or detector id": {"param": value}} overrides. Detector
    // keys apply to every instance; instance keys win over detector keys.
    void apply_overrides(const nlohmann::json& overrides) {
        if (overrides.is_null()) return;
        if (!overrides.is_object()) throw ConfigError("\"methods\" must be an object");
        for (const auto& [key, params] : overrides.items()) {
            if (!params.is_object()) throw ConfigError("overrides for '" + key + "' must be an object");
            bool matched = false;
            for (const bool instance_pass : {false, true}) {
                for (auto& type : types_) {
                    for (auto& e : type.entries) {
                        for (auto& m : e.methods) {
                            const bool hit = instance_pass ? (m.id == key && m.id != m.detector) : m.detector == key;
                            if (!hit) continue;
                            matched = true;
                            Hyperparameters merged = m.hyperparameters;
                            for (const auto& [name, value] : params.items()) {
                                if (value.is_number()) merged[name] = value.get<double>();
                                else if (value.is_string()) merged[name] = value.get<std::string>();
                                else throw ConfigError("parameter '" + name + "' must be a number or string");
                            }
                            m.hyperparameters = validate_hyperparameters(m.detector, merged);
                        }
                    }
                }
            }
            if (!matched) throw ConfigError("unknown method '" + key + "'");
        }
    }

private:
    std::vector<InsightType> types_;
};

// ---------------------------------------------------------------------------
// Dispatch

inline bool slot_is_categorical(const Signature& sig, std::size_t slot) { return sig.at(slot) == AttributeType::Categorical; }

// Runs one detector on one combination. Throws PreconditionError when the
// combination does not satisfy the detector's data requirements.
inline MethodOutput run_method(const MethodSpec& spec, const CombinationMatrix& x, std::uint64_t seed) {
    namespace d = detectors;
    if (x.spec.signature != spec.signature) throw ContractError("signature mismatch for '" + spec.id + "'");
    MethodOutput out;
    out.method_id = spec.id;
    const auto& det = spec.detector;
    const std::size_t n = x.row_count();

    if (det == "iqr") {
        const auto fences = d::tukey_fences(x.column(0), spec.number("k"));
        out.scores = PerPointScores{d::iqr_outlier_scores(x.column(0), spec.number("k"))};
        out.metadata = {{"fence_low", fences.low}, {"fence_high", fences.high}};
    } else if (det == "zscore") {
        out.scores = PerPointScores{d::zscore_outlier_scores(x.column(0))};
    } else if (det == "dbscan") {
        d::DbscanParams p;
        p.eps = spec.number("eps");
        p.min_pts = spec.integer("min_pts");
        p.eps_quantile = spec.number("eps_quantile");
        auto r = d::dbscan_outlier_scores(x.columns, p);
        out.metadata = {{"eps", r.eps}, {"min_pts", static_cast<double>(r.min_pts)}};
        out.scores = PerPointScores{std::move(r.scores)};
    } else if (det == "isolation_forest") {
        out.scores = PerPointScores{d::isolation_forest_scores(
            x.columns, {spec.integer("n_trees"), spec.integer("subsample"), seed})};
    } else if (det == "mahalanobis") {
        out.scores = PerPointScores{d::mahalanobis_scores(x.columns, spec.number("ridge"))};
    } else if (det == "kmeans_distance") {
        if (spec.integer("k") >= n) throw PreconditionError("k-means needs more rows than clusters");
        auto r = d::kmeans_distance_scores(x.columns, {spec.integer("k"), spec.integer("iterations"), seed, true});
        out.scores = PerPointScores{std::move(r.scores)};
    } else if (det == "kernel_mean_distance") {
        d::KernelMeanParams p;
        const auto& k = spec.text("kernel");
        p.kernel = k == "linear" ? d::Kernel::Linear : k == "polynomial" ? d::Kernel::Polynomial : d::Kernel::Rbf;
        p.gamma = spec.number("gamma");
        p.degree = spec.number("degree");
        p.coef0 = spec.number("coef0");
        p.reference_size = spec.integer("reference_size");
        p.seed = seed;
        out.scores = PerPointScores{d::kernel_mean_distance_scores(x.columns, p)};
    } else if (det == "pearson") {
        const double r = d::pearson_statistic(x.column(0), x.column(1));
        out.scores = ScalarScore{std::abs(r)};
        out.metadata = {{"r", r}};
    } else if (det == "spearman") {
        const double rho = d::spearman_statistic(x.column(0), x.column(1));
        out.scores = ScalarScore{std::abs(rho)};
        out.metadata = {{"rho", rho}};
    } else if (det == "mutual_information") {
        out.scores = ScalarScore{d::mutual_information(x.column(0), slot_is_categorical(spec.signature, 0), x.column(1),
                                                       slot_is_categorical(spec.signature, 1), spec.integer("bins"))};
    } else if (det == "skewness") {
        const double g1 = d::sample_skewness(x.column(0));
        out.scores = ScalarScore{d::bounded(std::abs(g1))};
        out.metadata = {{"skewness", g1}};
    } else if (det == "heavy_tail") {
        const double k = d::excess_kurtosis(x.column(0));
        out.scores = ScalarScore{d::bounded(std::max(0.0, k))};
        out.metadata = {{"excess_kurtosis", k}};
    } else if (det == "trend") {
        const auto fit = d::fit_trend(x.column(0), x.column(1));
        out.scores = ScalarScore{fit.r2};
        out.metadata = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2},
                        {"direction", fit.slope >= 0.0 ? 1.0 : -1.0}};
    } else if (det == "mann_kendall") {
        const double tau = d::mann_kendall_tau(x.column(0), x.column(1));
        out.scores = ScalarScore{std::abs(tau)};
        out.metadata = {{"tau", tau}};
    } else if (det == "rolling_residual") {
        const std::span<const double> groups = x.arity() == 3 ? x.column(2) : std::span<const double>{};
        out.scores = PerPointScores{d::rolling_residual_outlier_scores(x.column(0), x.column(1), groups, spec.integer("window"))};
    } else if (det == "peaks") {
        out.scores = SubsetScores{d::peak_scores(x.column(0), x.column(1), spec.integer("window"), spec.number("threshold"))};
    } else if (det == "seasonality") {
        const auto s = d::seasonality(x.column(0), x.column(1), spec.integer("min_lag"));
        out.scores = ScalarScore{s.score};
        out.metadata = {{"lag", static_cast<double>(s.lag)}};
    } else if (det == "granger") {
        const auto g = d::granger_causality(x.column(0), x.column(1), x.column(2), spec.integer("lag"));
        out.scores = ScalarScore{g.score};
        out.metadata = {{"p_first_to_second", g.p_x_to_y}, {"p_second_to_first", g.p_y_to_x},
                        {"direction", static_cast<double>(g.direction)}};
    } else if (det == "cramers_v") {
        out.scores = ScalarScore{d::cramers_v(x.column(0), x.column(1))};
    } else if (det == "chisq_residual") {
        auto r = d::chisq_residual_outlier_scores(x.column(0), x.column(1), spec.number("threshold"));
        out.scores = SubsetScores{std::move(r.rows)};
        out.flagged_cells = std::move(r.cells);
    } else if (det == "group_difference") {
        const auto kw = d::kruskal_wallis(x.column(0), x.column(1));
        out.scores = ScalarScore{std::clamp(1.0 - kw.p_value, 0.0, 1.0)};
        out.metadata = {{"h", kw.h}, {"p_value", kw.p_value}, {"groups", static_cast<double>(kw.groups)}};
    } else {
        throw ContractError("no detector '" + det + "'");
    }

    if (out.shape() != spec.output_shape) throw ContractError("method '" + spec.id + "' returned the wrong output shape");
    const auto finite = [](double v) { return std::isfinite(v); };
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            bool ok = true;
            if constexpr (std::is_same_v<T, PerPointScores>) {
                ok = s.values.size() == n && std::all_of(s.values.begin(), s.values.end(), finite);
            } else if constexpr (std::is_same_v<T, SubsetScores>) {
                ok = std::all_of(s.entries.begin(), s.entries.end(),
                                 [&](const auto& e) { return e.first < n && finite(e.second); });
            } else {
                ok = finite(s.value);
            }
            if (!ok) throw ContractError("method '" + spec.id + "' produced invalid scores");
        },
        out.scores);
    return out;
}

}  // namespace insight
