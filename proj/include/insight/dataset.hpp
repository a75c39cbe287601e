#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "stats.hpp"

namespace insight {

enum class AttributeType { Numerical, Categorical, Temporal };

using Signature = std::vector<AttributeType>;

inline char type_letter(AttributeType t) {
    switch (t) {
        case AttributeType::Numerical: return 'N';
        case AttributeType::Categorical: return 'C';
        case AttributeType::Temporal: return 'T';
    }
    return '?';
}

inline std::string signature_string(const Signature& sig) {
    std::string s;
    for (auto t : sig) s.push_back(type_letter(t));
    return s;
}

inline Signature parse_signature(std::string_view text) {
    Signature sig;
    for (char c : text) {
        switch (c) {
            case 'N': sig.push_back(AttributeType::Numerical); break;
            case 'C': sig.push_back(AttributeType::Categorical); break;
            case 'T': sig.push_back(AttributeType::Temporal); break;
            default: throw ConfigError("bad signature letter '" + std::string(1, c) + "'");
        }
    }
    return sig;
}

struct IngestConfig {
    std::size_t max_rows = 10000;
    std::uint64_t seed = 42;
    std::size_t cardinality_cap = 50;
    std::size_t combination_cap = 200;
    std::size_t min_rows = 8;
};

struct Column {
    std::string name;
    AttributeType type = AttributeType::Categorical;
    // Categorical column whose cardinality exceeds the cap, or a column with
    // no values at all. Never used in combinations.
    bool excluded = false;
    // Numerical values, epoch seconds for temporal, category ids for categorical.
    std::vector<std::optional<double>> values;
    std::vector<std::string> categories;

    double null_fraction() const {
        if (values.empty()) return 0.0;
        const auto missing = std::count_if(values.begin(), values.end(), [](const auto& v) { return !v; });
        return static_cast<double>(missing) / static_cast<double>(values.size());
    }
};

// Immutable after construction; safe to share across detector threads.
class Dataset {
public:
    Dataset() = default;

    Dataset(std::string name, std::vector<Column> columns, std::vector<std::size_t> source_rows = {})
        : name_(std::move(name)), columns_(std::move(columns)), source_rows_(std::move(source_rows)) {
        const std::size_t n = columns_.empty() ? 0 : columns_.front().values.size();
        std::unordered_set<std::string> seen;
        for (const auto& c : columns_) {
            if (c.values.size() != n) throw InputError("column '" + c.name + "' has inconsistent length");
            if (!seen.insert(c.name).second) throw InputError("duplicate header '" + c.name + "'");
        }
        if (source_rows_.empty()) {
            source_rows_.resize(n);
            for (std::size_t i = 0; i < n; ++i) source_rows_[i] = i;
        } else if (source_rows_.size() != n) {
            throw InputError("source row ids do not match row count");
        }
    }

    const std::string& name() const { return name_; }
    std::size_t row_count() const { return source_rows_.size(); }
    std::size_t column_count() const { return columns_.size(); }
    const std::vector<Column>& columns() const { return columns_; }
    const Column& column(std::size_t i) const { return columns_.at(i); }

    // Original (pre-sampling) data row id of row position `i`.
    std::size_t source_row(std::size_t i) const { return source_rows_.at(i); }
    const std::vector<std::size_t>& source_rows() const { return source_rows_; }

    std::optional<std::size_t> find_column(std::string_view name) const {
        for (std::size_t i = 0; i < columns_.size(); ++i)
            if (columns_[i].name == name) return i;
        return std::nullopt;
    }

private:
    std::string name_;
    std::vector<Column> columns_;
    std::vector<std::size_t> source_rows_;
};

struct CombinationSpec {
    Signature signature;
    std::vector<std::string> column_names;

    friend bool operator==(const CombinationSpec&, const CombinationSpec&) = default;

    std::string key() const {
        std::string k = signature_string(signature);
        for (const auto& c : column_names) {
            k += '|';
            k += c;
        }
        return k;
    }
};

// One attribute combination restricted to rows where every member is present.
struct CombinationMatrix {
    CombinationSpec spec;
    std::vector<std::size_t> column_indices;
    std::vector<std::vector<double>> columns;  // one per signature slot
    std::vector<std::size_t> rows;             // dataset row positions, strictly increasing

    std::size_t row_count() const { return rows.size(); }
    std::size_t arity() const { return columns.size(); }
    std::span<const double> column(std::size_t slot) const { return columns.at(slot); }
};

// ---------------------------------------------------------------------------
// Cell parsing

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_number(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    double value = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) return std::nullopt;
    return value;
}

namespace detail {

inline bool read_digits(std::string_view& s, std::size_t count, int& out) {
    if (s.size() < count) return false;
    int v = 0;
    for (std::size_t i = 0; i < count; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        v = v * 10 + (s[i] - '0');
    }
    out = v;
    s.remove_prefix(count);
    return true;
}

inline bool consume(std::string_view& s, char c) {
    if (s.empty() || s.front() != c) return false;
    s.remove_prefix(1);
    return true;
}

}  // namespace detail

// ISO 8601 date or date-time to epoch seconds. Accepted forms:
// YYYY-MM-DD, then optionally [T| ]HH:MM[:SS[.fff]] and Z or +-HH[:]MM.
inline std::optional<double> parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    text = trim(text);
    int y = 0, mo = 0, d = 0;
    if (!detail::read_digits(text, 4, y) || !detail::consume(text, '-') || !detail::read_digits(text, 2, mo) ||
        !detail::consume(text, '-') || !detail::read_digits(text, 2, d))
        return std::nullopt;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    double seconds = static_cast<double>(sys_days{ymd}.time_since_epoch().count()) * 86400.0;
    if (text.empty()) return seconds;

    if (!detail::consume(text, 'T') && !detail::consume(text, ' ')) return std::nullopt;
    int hh = 0, mm = 0, ss = 0;
    if (!detail::read_digits(text, 2, hh) || !detail::consume(text, ':') || !detail::read_digits(text, 2, mm))
        return std::nullopt;
    double frac = 0.0;
    if (detail::consume(text, ':')) {
        if (!detail::read_digits(text, 2, ss)) return std::nullopt;
        if (detail::consume(text, '.')) {
            double scale = 0.1;
            std::size_t digits = 0;
            while (!text.empty() && text.front() >= '0' && text.front() <= '9') {
                frac += scale * (text.front() - '0');
                scale /= 10.0;
                text.remove_prefix(1);
                ++digits;
            }
            if (digits == 0) return std::nullopt;
        }
    }
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
    seconds += hh * 3600.0 + mm * 60.0 + ss + frac;

    if (text.empty() || (text.size() == 1 && text.front() == 'Z')) return seconds;
    const char sign = text.front();
    if (sign != '+' && sign != '-') return std::nullopt;
    text.remove_prefix(1);
    int oh = 0, om = 0;
    if (!detail::read_digits(text, 2, oh)) return std::nullopt;
    detail::consume(text, ':');
    if (!detail::read_digits(text, 2, om) || !text.empty() || oh > 23 || om > 59) return std::nullopt;
    const double offset = oh * 3600.0 + om * 60.0;
    return sign == '+' ? seconds - offset : seconds + offset;
}

inline std::string format_timestamp(double epoch_seconds) {
    using namespace std::chrono;
    const auto whole = static_cast<long long>(std::floor(epoch_seconds));
    const auto days_since = static_cast<int>(std::floor(static_cast<double>(whole) / 86400.0));
    const sys_days day_point{days{days_since}};
    const year_month_day ymd{day_point};
    long long rem = whole - static_cast<long long>(days_since) * 86400;
    const int hh = static_cast<int>(rem / 3600);
    rem %= 3600;
    const int mm = static_cast<int>(rem / 60);
    const int ss = static_cast<int>(rem % 60);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    std::string out = buf;
    if (hh != 0 || mm != 0 || ss != 0) {
        std::snprintf(buf, sizeof buf, "T%02d:%02d:%02d", hh, mm, ss);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Type inference

struct InferredType {
    AttributeType type;
    bool overflow = false;  // categorical beyond the cardinality cap
};

inline InferredType infer_column_type(std::span<const std::string> values, const IngestConfig& config) {
    std::size_t non_empty = 0, as_time = 0, as_number = 0;
    std::unordered_set<std::string_view> distinct;
    for (const auto& raw : values) {
        const auto cell = trim(raw);
        if (cell.empty()) continue;
        ++non_empty;
        if (parse_timestamp(cell)) ++as_time;
        if (parse_number(cell)) ++as_number;
        distinct.insert(cell);
    }
    if (non_empty == 0) throw InputError("untyped column");

    const auto enough = [&](std::size_t hits) { return static_cast<double>(hits) >= 0.95 * static_cast<double>(non_empty); };
    if (enough(as_time)) return {AttributeType::Temporal};
    if (enough(as_number)) return {AttributeType::Numerical};

    // A floor of 2 keeps two-row and three-row inputs categorical.
    const std::size_t cap = std::min(config.cardinality_cap, std::max<std::size_t>(values.size() / 2, 2));
    return {AttributeType::Categorical, distinct.size() > cap};
}

inline AttributeType infer_attribute_type(std::span<const std::string> values, const IngestConfig& config = {}) {
    return infer_column_type(values, config).type;
}

// ---------------------------------------------------------------------------
// CSV ingestion (RFC 4180)

inline std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    const auto end_record = [&] {
        record.push_back(std::move(field));
        field.clear();
        // A lone empty field is a blank line.
        if (!(record.size() == 1 && record.front().empty() && !field_started)) records.push_back(std::move(record));
        record.clear();
        field_started = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                record.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                end_record();
                break;
            case '\n':
                end_record();
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) throw InputError("unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) end_record();
    return records;
}

inline Dataset parse_csv(std::string_view text, std::string name, const IngestConfig& config = {}) {
    if (trim(text).empty()) throw InputError("empty file");
    auto records = parse_csv_records(text);
    if (records.empty()) throw InputError("empty file");
    const auto& header = records.front();
    {
        std::unordered_set<std::string> seen;
        for (const auto& h : header)
            if (!seen.insert(std::string(trim(h))).second) throw InputError("duplicate header '" + h + "'");
    }
    const std::size_t rows = records.size() - 1;
    if (rows == 0) throw InputError("zero data rows");
    const std::size_t width = header.size();
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != width)
            throw InputError("row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                             " fields, expected " + std::to_string(width));
    }

    std::vector<Column> columns;
    columns.reserve(width);
    std::vector<std::string> cells(rows);
    for (std::size_t c = 0; c < width; ++c) {
        for (std::size_t r = 0; r < rows; ++r) cells[r] = std::string(trim(records[r + 1][c]));
        Column col;
        col.name = std::string(trim(header[c]));
        col.values.resize(rows);

        InferredType inferred{AttributeType::Categorical, true};
        try {
            inferred = infer_column_type(cells, config);
        } catch (const InputError&) {
            // Entirely empty column: keep it visible in the schema but unusable.
        }
        col.type = inferred.type;
        col.excluded = inferred.overflow;

        std::unordered_map<std::string, std::size_t> ids;
        for (std::size_t r = 0; r < rows; ++r) {
            const auto& cell = cells[r];
            if (cell.empty()) continue;
            switch (col.type) {
                case AttributeType::Numerical: col.values[r] = parse_number(cell); break;
                case AttributeType::Temporal: col.values[r] = parse_timestamp(cell); break;
                case AttributeType::Categorical: {
                    auto [it, inserted] = ids.try_emplace(cell, col.categories.size());
                    if (inserted) col.categories.push_back(cell);
                    col.values[r] = static_cast<double>(it->second);
                    break;
                }
            }
        }
        if (std::none_of(col.values.begin(), col.values.end(), [](const auto& v) { return v.has_value(); }))
            col.excluded = true;
        columns.push_back(std::move(col));
    }
    return Dataset(std::move(name), std::move(columns));
}

inline Dataset load_csv(const std::string& path, const IngestConfig& config = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    auto name = path;
    if (const auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
    return parse_csv(buffer.str(), name, config);
}

// ---------------------------------------------------------------------------
// Sampling

// Uniform reservoir sample of `max_rows` rows, kept in original order.
inline Dataset sample_rows(const Dataset& ds, std::size_t max_rows, std::uint64_t seed) {
    if (max_rows < 100) throw ConfigError("max_rows must be at least 100");
    const std::size_t n = ds.row_count();
    if (n <= max_rows) return ds;

    Rng rng(seed);
    std::vector<std::size_t> reservoir(max_rows);
    for (std::size_t i = 0; i < max_rows; ++i) reservoir[i] = i;
    for (std::size_t i = max_rows; i < n; ++i) {
        const auto j = rng.below(i + 1);
        if (j < max_rows) reservoir[j] = i;
    }
    std::sort(reservoir.begin(), reservoir.end());

    std::vector<Column> columns;
    columns.reserve(ds.column_count());
    for (const auto& src : ds.columns()) {
        Column col = src;
        col.values.clear();
        col.values.reserve(max_rows);
        for (auto r : reservoir) col.values.push_back(src.values[r]);
        columns.push_back(std::move(col));
    }
    std::vector<std::size_t> source(max_rows);
    for (std::size_t i = 0; i < max_rows; ++i) source[i] = ds.source_row(reservoir[i]);
    return Dataset(ds.name(), std::move(columns), std::move(source));
}

// ---------------------------------------------------------------------------
// Combination enumeration

inline CombinationMatrix build_combination(const Dataset& ds, const Signature& signature,
                                           std::vector<std::size_t> column_indices) {
    CombinationMatrix m;
    m.spec.signature = signature;
    for (auto c : column_indices) m.spec.column_names.push_back(ds.column(c).name);
    m.columns.resize(column_indices.size());
    for (std::size_t r = 0; r < ds.row_count(); ++r) {
        const bool complete = std::all_of(column_indices.begin(), column_indices.end(),
                                          [&](std::size_t c) { return ds.column(c).values[r].has_value(); });
        if (!complete) continue;
        m.rows.push_back(r);
        for (std::size_t s = 0; s < column_indices.size(); ++s) m.columns[s].push_back(*ds.column(column_indices[s]).values[r]);
    }
    m.column_indices = std::move(column_indices);
    return m;
}

// All column subsets matching `signature`. Slots of the same attribute type
// take strictly increasing column indices, so each subset appears once.
// Combinations with fewer than `min_rows` complete rows are dropped, then the
// list is truncated to the first `cap` in lexicographic column-index order.
inline std::vector<CombinationMatrix> enumerate_combinations(const Dataset& ds, const Signature& signature,
                                                             std::size_t cap, std::size_t min_rows = 8) {
    if (signature.empty() || signature.size() > 4) throw ConfigError("signature length must be 1..4");
    std::vector<CombinationMatrix> out;
    std::vector<std::size_t> chosen;

    const auto recurse = [&](auto&& self, std::size_t slot) -> void {
        if (out.size() >= cap) return;
        if (slot == signature.size()) {
            auto m = build_combination(ds, signature, chosen);
            if (m.row_count() >= min_rows) out.push_back(std::move(m));
            return;
        }
        std::size_t start = 0;
        for (std::size_t prev = 0; prev < slot; ++prev)
            if (signature[prev] == signature[slot]) start = std::max(start, chosen[prev] + 1);
        for (std::size_t c = start; c < ds.column_count(); ++c) {
            const auto& col = ds.column(c);
            if (col.excluded || col.type != signature[slot]) continue;
            chosen.push_back(c);
            self(self, slot + 1);
            chosen.pop_back();
            if (out.size() >= cap) return;
        }
    };
    recurse(recurse, 0);
    return out;
}

}  // namespace insight
