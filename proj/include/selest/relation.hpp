#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "selest/common.hpp"
#include "selest/csv.hpp"

namespace selest {

enum class AttributeKind { categorical, numeric };

inline const char* to_string(AttributeKind kind) {
    return kind == AttributeKind::categorical ? "categorical" : "numeric";
}

/// One equi-depth bucket of a numeric attribute. Bounds are observed raw values.
struct Bucket {
    double lo = 0.0;
    double hi = 0.0;
    std::uint64_t distinct_count = 0;
    std::uint64_t row_count = 0;

    bool operator==(const Bucket&) const = default;
};

/// Shortest round-trip decimal form of a double ("3", "2.5", "1e-07").
inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::optional<double> parse_number(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

struct AttributeMeta {
    std::string name;
    AttributeKind kind = AttributeKind::categorical;
    /// |Dom| after encoding; 0 while a numeric attribute awaits discretization.
    std::size_t domain_size = 0;
    /// code -> label; for bucketized numerics the label is "lo..hi" (or "v" for single-value buckets)
    std::vector<std::string> dictionary;
    std::vector<Bucket> buckets;

    bool encoded() const { return domain_size > 0; }
    bool bucketized() const { return !buckets.empty(); }

    std::optional<Code> lookup(const std::string& label) const {
        auto it = std::find(dictionary.begin(), dictionary.end(), label);
        if (it == dictionary.end()) return std::nullopt;
        return static_cast<Code>(it - dictionary.begin());
    }

    /// Bucket holding raw value `v`. Buckets are extended rightwards to the next
    /// bucket's lower bound so unseen values between observed ones still map.
    std::optional<Code> bucket_of(double v) const {
        if (buckets.empty() || v < buckets.front().lo || v > buckets.back().hi) return std::nullopt;
        auto it = std::upper_bound(buckets.begin(), buckets.end(), v,
                                   [](double value, const Bucket& b) { return value < b.lo; });
        return static_cast<Code>(std::distance(buckets.begin(), it) - 1);
    }

    bool operator==(const AttributeMeta&) const = default;
};

using Schema = std::vector<AttributeMeta>;

/// Hash of attribute names, kinds, domain sizes, dictionaries and buckets.
inline std::uint64_t schema_fingerprint(const Schema& schema) {
    Fnv1a h;
    for (const auto& a : schema) {
        h.update(a.name);
        h.update(to_string(a.kind));
        h.update(std::to_string(a.domain_size));
        for (const auto& label : a.dictionary) h.update(label);
        for (const auto& b : a.buckets) {
            h.update(format_number(b.lo));
            h.update(format_number(b.hi));
            h.update(std::to_string(b.distinct_count));
        }
    }
    return h.value();
}

struct PointPredicate {
    std::size_t attr = 0;
    Code code = 0;
    bool operator==(const PointPredicate&) const = default;
    auto operator<=>(const PointPredicate&) const = default;
};

/// Conjunction of equality predicates over codes; unlisted attributes are wildcards.
struct PointQuery {
    std::vector<PointPredicate> predicates;
    bool operator==(const PointQuery&) const = default;
    auto operator<=>(const PointQuery&) const = default;
};

struct RangePredicate {
    std::size_t attr = 0;
    Code lo = 0;
    Code hi = 0;
    bool operator==(const RangePredicate&) const = default;
};

/// Conjunction of inclusive code ranges.
struct RangeQuery {
    std::vector<RangePredicate> predicates;
    bool operator==(const RangeQuery&) const = default;
};

/// Inclusive range over raw values. Numeric attributes compare raw values,
/// categorical attributes compare codes.
struct ValuePredicate {
    std::size_t attr = 0;
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const ValuePredicate&) const = default;
};

struct ValueRangeQuery {
    std::vector<ValuePredicate> predicates;
    bool operator==(const ValueRangeQuery&) const = default;
};

inline RangeQuery to_range(const PointQuery& q) {
    RangeQuery r;
    for (const auto& p : q.predicates) r.predicates.push_back({p.attr, p.code, p.code});
    return r;
}

/// Column-major dictionary-encoded table. Numeric columns keep their raw values
/// next to the bucket codes so raw-value range queries can be answered exactly.
class Relation {
public:
    Relation() = default;
    Relation(Schema schema, std::vector<std::vector<Code>> codes, std::vector<std::vector<double>> raw,
             std::size_t rows)
        : schema_(std::move(schema)), codes_(std::move(codes)), raw_(std::move(raw)), rows_(rows) {
        codes_.resize(schema_.size());
        raw_.resize(schema_.size());
    }

    const Schema& schema() const { return schema_; }
    const AttributeMeta& attribute(std::size_t i) const { return schema_.at(i); }
    std::size_t num_attributes() const { return schema_.size(); }
    std::size_t num_rows() const { return rows_; }

    std::span<const Code> column(std::size_t attr) const {
        if (!schema_.at(attr).encoded()) {
            throw Error("schema", "attribute '" + schema_[attr].name + "' is not encoded yet");
        }
        return codes_[attr];
    }
    std::span<const double> raw_column(std::size_t attr) const { return raw_.at(attr); }
    Code code(std::size_t row, std::size_t attr) const { return codes_[attr][row]; }

    std::vector<Code> tuple(std::size_t row) const {
        std::vector<Code> t(schema_.size());
        for (std::size_t a = 0; a < schema_.size(); ++a) t[a] = codes_[a][row];
        return t;
    }

    bool fully_encoded() const {
        return std::all_of(schema_.begin(), schema_.end(), [](const auto& a) { return a.encoded(); });
    }

    std::optional<std::size_t> find_attribute(const std::string& name) const {
        for (std::size_t i = 0; i < schema_.size(); ++i) {
            if (schema_[i].name == name) return i;
        }
        return std::nullopt;
    }

    /// Replaces attribute `attr` with a bucketized version and recodes its column.
    Relation with_bucketization(std::size_t attr, AttributeMeta meta) const {
        if (raw_.at(attr).size() != rows_) throw Error("schema", "attribute '" + meta.name + "' has no raw values");
        Relation out = *this;
        std::vector<Code> col(rows_);
        for (std::size_t r = 0; r < rows_; ++r) {
            auto b = meta.bucket_of(raw_[attr][r]);
            if (!b) throw Error("domain", "value outside bucketization of '" + meta.name + "'");
            col[r] = *b;
        }
        out.codes_[attr] = std::move(col);
        out.schema_[attr] = std::move(meta);
        return out;
    }

    /// Keeps only the listed rows (in the given order).
    Relation select_rows(std::span<const std::size_t> rows) const {
        Relation out;
        out.schema_ = schema_;
        out.rows_ = rows.size();
        out.codes_.resize(schema_.size());
        out.raw_.resize(schema_.size());
        for (std::size_t a = 0; a < schema_.size(); ++a) {
            if (!codes_[a].empty()) {
                for (auto r : rows) out.codes_[a].push_back(codes_[a][r]);
            }
            if (!raw_[a].empty()) {
                for (auto r : rows) out.raw_[a].push_back(raw_[a][r]);
            }
        }
        return out;
    }

    /// Rows of `other` appended; schemas must be identical.
    Relation concat(const Relation& other) const {
        if (!(schema_ == other.schema_)) throw Error("schema", "cannot concatenate relations with different schemas");
        Relation out = *this;
        for (std::size_t a = 0; a < schema_.size(); ++a) {
            out.codes_[a].insert(out.codes_[a].end(), other.codes_[a].begin(), other.codes_[a].end());
            out.raw_[a].insert(out.raw_[a].end(), other.raw_[a].begin(), other.raw_[a].end());
        }
        out.rows_ += other.rows_;
        return out;
    }

private:
    Schema schema_;
    std::vector<std::vector<Code>> codes_;
    std::vector<std::vector<double>> raw_;
    std::size_t rows_ = 0;
};

/// Builds a fully categorical relation from code rows; domain sizes are max code + 1
/// unless given, dictionary labels are the decimal codes.
inline Relation make_relation(const std::vector<std::string>& names, const std::vector<std::vector<Code>>& rows,
                              std::vector<std::size_t> domain_sizes = {}) {
    if (rows.empty()) throw Error("domain", "empty relation");
    const std::size_t m = names.size();
    if (domain_sizes.empty()) {
        domain_sizes.assign(m, 0);
        for (const auto& row : rows) {
            for (std::size_t a = 0; a < m; ++a) domain_sizes[a] = std::max<std::size_t>(domain_sizes[a], row.at(a) + 1);
        }
    }
    Schema schema(m);
    std::vector<std::vector<Code>> cols(m, std::vector<Code>(rows.size()));
    for (std::size_t a = 0; a < m; ++a) {
        schema[a].name = names[a];
        schema[a].domain_size = domain_sizes[a];
        for (std::size_t c = 0; c < domain_sizes[a]; ++c) schema[a].dictionary.push_back(std::to_string(c));
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m) throw Error("parse", "ragged row " + std::to_string(r + 1));
        for (std::size_t a = 0; a < m; ++a) {
            if (rows[r][a] >= domain_sizes[a]) throw Error("domain", "code out of domain");
            cols[a][r] = rows[r][a];
        }
    }
    return Relation(std::move(schema), std::move(cols), {}, rows.size());
}

struct ColumnHint {
    std::optional<AttributeKind> kind;
    std::optional<std::size_t> buckets;
};

using SchemaHints = std::map<std::string, ColumnHint>;

/// Dictionary-encodes categorical columns in first-appearance order (empty
/// cells are an ordinary value) and keeps numeric columns raw, pending
/// discretization. A column without a hint is numeric when every cell parses
/// as a finite number.
inline Relation ingest_table(const csv::Table& table, const SchemaHints& hints = {}) {
    if (table.rows.empty()) throw Error("parse", "empty relation");
    const std::size_t m = table.header.size();
    const std::size_t n = table.rows.size();
    for (const auto& [name, hint] : hints) {
        if (std::find(table.header.begin(), table.header.end(), name) == table.header.end()) {
            throw Error("schema", "hint for unknown column '" + name + "'");
        }
    }

    Schema schema(m);
    std::vector<std::vector<Code>> codes(m);
    std::vector<std::vector<double>> raw(m);
    for (std::size_t a = 0; a < m; ++a) {
        auto& meta = schema[a];
        meta.name = table.header[a];
        std::optional<AttributeKind> kind;
        if (auto it = hints.find(meta.name); it != hints.end()) {
            kind = it->second.kind;
            if (!kind && it->second.buckets) kind = AttributeKind::numeric;
        }
        if (!kind) {
            bool all_numeric = true;
            for (const auto& row : table.rows) {
                if (!parse_number(row[a])) {
                    all_numeric = false;
                    break;
                }
            }
            kind = all_numeric ? AttributeKind::numeric : AttributeKind::categorical;
        }
        meta.kind = *kind;

        if (meta.kind == AttributeKind::numeric) {
            raw[a].reserve(n);
            for (std::size_t r = 0; r < n; ++r) {
                auto v = parse_number(table.rows[r][a]);
                if (!v) {
                    throw Error("parse", "unparseable numeric cell in column '" + meta.name + "' at row " +
                                             std::to_string(r + 1) + ": '" + table.rows[r][a] + "'");
                }
                raw[a].push_back(*v);
            }
        } else {
            std::unordered_map<std::string, Code> dict;
            codes[a].reserve(n);
            for (const auto& row : table.rows) {
                auto [it, inserted] = dict.emplace(row[a], static_cast<Code>(meta.dictionary.size()));
                if (inserted) meta.dictionary.push_back(row[a]);
                codes[a].push_back(it->second);
            }
            meta.domain_size = meta.dictionary.size();
        }
    }
    return Relation(std::move(schema), std::move(codes), std::move(raw), n);
}

inline Relation ingest_csv(const std::string& path, const SchemaHints& hints = {}) {
    return ingest_table(csv::read_file(path), hints);
}

/// Equi-depth bucketing: sort the values, close a bucket once the cumulative
/// row count reaches ceil(n*(b+1)/k), never split a run of equal values, and
/// force a cut when the remaining distinct values are exactly enough for the
/// remaining buckets.
inline AttributeMeta discretize_equidepth(const Relation& relation, std::size_t attr, std::size_t num_buckets) {
    const auto& src = relation.attribute(attr);
    if (src.kind != AttributeKind::numeric) throw Error("schema", "attribute '" + src.name + "' is not numeric");
    if (num_buckets < 1) throw Error("domain", "bucket count must be at least 1");

    std::map<double, std::uint64_t> counts;
    for (double v : relation.raw_column(attr)) ++counts[v];
    const std::size_t distinct = counts.size();
    if (num_buckets > distinct) {
        throw Error("domain", "cannot cut '" + src.name + "' into " + std::to_string(num_buckets) + " buckets: only " +
                                  std::to_string(distinct) + " distinct values");
    }

    const std::uint64_t n = relation.num_rows();
    AttributeMeta meta;
    meta.name = src.name;
    meta.kind = AttributeKind::numeric;

    Bucket current{};
    bool open = false;
    std::uint64_t cumulative = 0;
    std::size_t index = 0;
    for (const auto& [value, count] : counts) {
        if (!open) {
            current = Bucket{value, value, 0, 0};
            open = true;
        }
        current.hi = value;
        current.distinct_count += 1;
        current.row_count += count;
        cumulative += count;

        const std::size_t remaining_distinct = distinct - index - 1;
        const std::size_t remaining_buckets = num_buckets - meta.buckets.size() - 1;
        const std::uint64_t boundary = (n * (meta.buckets.size() + 1) + num_buckets - 1) / num_buckets;
        if (remaining_buckets > 0 && (cumulative >= boundary || remaining_distinct == remaining_buckets)) {
            meta.buckets.push_back(current);
            open = false;
        }
        ++index;
    }
    if (open) meta.buckets.push_back(current);

    meta.domain_size = meta.buckets.size();
    for (const auto& b : meta.buckets) {
        meta.dictionary.push_back(b.lo == b.hi ? format_number(b.lo) : format_number(b.lo) + ".." + format_number(b.hi));
    }
    return meta;
}

/// Discretizes every pending numeric attribute. Hinted bucket counts win;
/// otherwise min(default_buckets, distinct values) buckets are used.
inline Relation encode_numeric_attributes(const Relation& relation, std::size_t default_buckets,
                                          const SchemaHints& hints = {}) {
    Relation out = relation;
    for (std::size_t a = 0; a < relation.num_attributes(); ++a) {
        const auto& meta = relation.attribute(a);
        if (meta.kind != AttributeKind::numeric || meta.encoded()) continue;
        std::size_t k = default_buckets;
        bool hinted = false;
        if (auto it = hints.find(meta.name); it != hints.end() && it->second.buckets) {
            k = *it->second.buckets;
            hinted = true;
        }
        if (!hinted) {
            std::vector<double> values(relation.raw_column(a).begin(), relation.raw_column(a).end());
            std::sort(values.begin(), values.end());
            const auto distinct = static_cast<std::size_t>(std::unique(values.begin(), values.end()) - values.begin());
            k = std::min(k, distinct);
        }
        out = out.with_bucketization(a, discretize_equidepth(out, a, k));
    }
    return out;
}

/// Encodes new CSV rows with an existing schema; unseen categorical values and
/// numeric values outside the bucketization are rejected.
inline Relation encode_with_schema(const csv::Table& table, const Schema& schema) {
    if (table.rows.empty()) throw Error("parse", "empty relation");
    if (table.header.size() != schema.size()) throw Error("schema", "column count differs from the model schema");
    const std::size_t n = table.rows.size();
    std::vector<std::vector<Code>> codes(schema.size());
    std::vector<std::vector<double>> raw(schema.size());
    for (std::size_t a = 0; a < schema.size(); ++a) {
        const auto& meta = schema[a];
        if (table.header[a] != meta.name) {
            throw Error("schema", "column " + std::to_string(a) + " is '" + table.header[a] + "', expected '" +
                                      meta.name + "'");
        }
        for (std::size_t r = 0; r < n; ++r) {
            const auto& cell = table.rows[r][a];
            if (meta.kind == AttributeKind::numeric) {
                auto v = parse_number(cell);
                if (!v) {
                    throw Error("parse", "unparseable numeric cell in column '" + meta.name + "' at row " +
                                             std::to_string(r + 1));
                }
                auto b = meta.bucket_of(*v);
                if (!b) {
                    throw Error("domain", "value " + cell + " of '" + meta.name + "' at row " + std::to_string(r + 1) +
                                              " lies outside the trained domain; retrain required");
                }
                raw[a].push_back(*v);
                codes[a].push_back(*b);
            } else {
                auto c = meta.lookup(cell);
                if (!c) {
                    throw Error("domain", "unseen value '" + cell + "' of '" + meta.name + "' at row " +
                                              std::to_string(r + 1) + "; retrain required");
                }
                codes[a].push_back(*c);
            }
        }
    }
    return Relation(schema, std::move(codes), std::move(raw), n);
}

inline void validate(const Schema& schema, const PointQuery& q) {
    std::vector<bool> seen(schema.size(), false);
    for (const auto& p : q.predicates) {
        if (p.attr >= schema.size()) throw Error("query", "attribute index " + std::to_string(p.attr) + " out of range");
        if (seen[p.attr]) throw Error("query", "attribute '" + schema[p.attr].name + "' constrained twice");
        seen[p.attr] = true;
        if (p.code >= schema[p.attr].domain_size) {
            throw Error("query", "code " + std::to_string(p.code) + " outside domain of '" + schema[p.attr].name + "'");
        }
    }
}

inline void validate(const Schema& schema, const RangeQuery& q) {
    std::vector<bool> seen(schema.size(), false);
    for (const auto& p : q.predicates) {
        if (p.attr >= schema.size()) throw Error("query", "attribute index " + std::to_string(p.attr) + " out of range");
        if (seen[p.attr]) throw Error("query", "attribute '" + schema[p.attr].name + "' constrained twice");
        seen[p.attr] = true;
        if (p.lo > p.hi) throw Error("query", "empty range on '" + schema[p.attr].name + "'");
        if (p.hi >= schema[p.attr].domain_size) {
            throw Error("query", "range exceeds domain of '" + schema[p.attr].name + "'");
        }
    }
}

inline void validate(const Schema& schema, const ValueRangeQuery& q) {
    std::vector<bool> seen(schema.size(), false);
    for (const auto& p : q.predicates) {
        if (p.attr >= schema.size()) throw Error("query", "attribute index " + std::to_string(p.attr) + " out of range");
        if (seen[p.attr]) throw Error("query", "attribute '" + schema[p.attr].name + "' constrained twice");
        seen[p.attr] = true;
        if (p.lo > p.hi) throw Error("query", "empty range on '" + schema[p.attr].name + "'");
    }
}

/// Exact matching-row count by full scan.
inline std::size_t count_matches(const Relation& relation, const PointQuery& q) {
    validate(relation.schema(), q);
    std::size_t count = 0;
    for (std::size_t r = 0; r < relation.num_rows(); ++r) {
        bool match = true;
        for (const auto& p : q.predicates) {
            if (relation.code(r, p.attr) != p.code) {
                match = false;
                break;
            }
        }
        count += match ? 1 : 0;
    }
    return count;
}

inline std::size_t count_matches(const Relation& relation, const RangeQuery& q) {
    validate(relation.schema(), q);
    std::size_t count = 0;
    for (std::size_t r = 0; r < relation.num_rows(); ++r) {
        bool match = true;
        for (const auto& p : q.predicates) {
            const Code c = relation.code(r, p.attr);
            if (c < p.lo || c > p.hi) {
                match = false;
                break;
            }
        }
        count += match ? 1 : 0;
    }
    return count;
}

inline std::size_t count_matches(const Relation& relation, const ValueRangeQuery& q) {
    validate(relation.schema(), q);
    std::size_t count = 0;
    for (std::size_t r = 0; r < relation.num_rows(); ++r) {
        bool match = true;
        for (const auto& p : q.predicates) {
            const bool numeric = relation.attribute(p.attr).kind == AttributeKind::numeric;
            const double v = numeric ? relation.raw_column(p.attr)[r] : static_cast<double>(relation.code(r, p.attr));
            if (v < p.lo || v > p.hi) {
                match = false;
                break;
            }
        }
        count += match ? 1 : 0;
    }
    return count;
}

/// Ground-truth normalized selectivity (full scan).
template <typename Query>
double true_selectivity(const Relation& relation, const Query& q) {
    return static_cast<double>(count_matches(relation, q)) / static_cast<double>(relation.num_rows());
}

/// Product of domain sizes over `attrs`, saturating at UINT64_MAX.
inline std::uint64_t jpd_size(const Schema& schema, std::span<const std::size_t> attrs) {
    if (attrs.empty()) throw Error("domain", "jpd_size needs at least one attribute");
    std::uint64_t size = 1;
    for (auto a : attrs) {
        const std::uint64_t d = schema.at(a).domain_size;
        if (d != 0 && size > std::numeric_limits<std::uint64_t>::max() / d) return std::numeric_limits<std::uint64_t>::max();
        size *= d;
    }
    return size;
}

/// Shannon entropy (bits) of the empirical joint distribution over `attrs`.
inline double joint_entropy(const Relation& relation, std::span<const std::size_t> attrs) {
    if (attrs.empty()) throw Error("domain", "joint_entropy needs at least one attribute");
    std::map<std::vector<Code>, std::size_t> counts;
    std::vector<Code> key(attrs.size());
    for (std::size_t r = 0; r < relation.num_rows(); ++r) {
        for (std::size_t i = 0; i < attrs.size(); ++i) key[i] = relation.code(r, attrs[i]);
        ++counts[key];
    }
    const double n = static_cast<double>(relation.num_rows());
    double h = 0.0;
    for (const auto& [k, c] : counts) {
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h == 0.0 ? 0.0 : h;
}

}  // namespace selest
