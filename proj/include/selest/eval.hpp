#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selest/common.hpp"
#include "selest/csv.hpp"
#include "selest/relation.hpp"

namespace selest::eval {

/// max(s / est, est / s). The estimate is first raised to `floor`.
inline double qerror(double truth, double estimate, double floor = 0.0) {
    if (!(truth > 0.0)) throw Error("domain", "q-error needs a positive true selectivity");
    const double e = std::max(estimate, floor);
    if (!(e > 0.0)) throw Error("domain", "q-error needs a positive estimate (pass a floor)");
    return std::max(truth / e, e / truth);
}

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value.
inline double percentile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw Error("domain", "percentile of an empty set");
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

inline double percentile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return percentile_sorted(values, p);
}

inline double median(std::vector<double> values) { return percentile(std::move(values), 50.0); }

struct LabeledQuery {
    PointQuery query;
    double selectivity = 0.0;

    bool zero() const { return selectivity <= 0.0; }
};

// ---------------------------------------------------------------------------
// test workloads

/// Queries per predicate count 1..m; remainder goes round-robin from k = 1.
inline std::vector<std::size_t> allocate_per_count(std::size_t m, std::size_t total) {
    if (m == 0) throw Error("domain", "relation has no attributes");
    if (total < m) throw Error("domain", "test workload size " + std::to_string(total) + " is below the attribute count " + std::to_string(m));
    std::vector<std::size_t> out(m, total / m);
    for (std::size_t i = 0; i < total % m; ++i) ++out[i];
    return out;
}

/// Splits `quota` over combinations one query at a time, skipping
/// combinations whose value space is exhausted.
inline std::vector<std::size_t> allocate_round_robin(std::size_t quota, std::span<const std::uint64_t> capacity) {
    std::vector<std::size_t> out(capacity.size(), 0);
    bool progress = true;
    while (quota > 0 && progress) {
        progress = false;
        for (std::size_t i = 0; i < capacity.size() && quota > 0; ++i) {
            if (out[i] < capacity[i]) {
                ++out[i];
                --quota;
                progress = true;
            }
        }
    }
    return out;
}

/// All k-subsets of {0..m-1} in lexicographic order.
inline std::vector<std::vector<std::size_t>> combinations(std::size_t m, std::size_t k) {
    std::vector<std::vector<std::size_t>> out;
    if (k > m) return out;
    std::vector<std::size_t> c(k);
    std::iota(c.begin(), c.end(), 0);
    while (true) {
        out.push_back(c);
        std::size_t i = k;
        while (i > 0 && c[i - 1] == m - k + i - 1) --i;
        if (i == 0) break;
        ++c[i - 1];
        for (std::size_t j = i; j < k; ++j) c[j] = c[j - 1] + 1;
    }
    return out;
}

/// `count` distinct integers from [0, n) (Floyd), ascending.
inline std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t count, Rng& rng) {
    if (count > n) throw Error("domain", "cannot draw more distinct values than exist");
    std::set<std::uint64_t> chosen;
    for (std::uint64_t j = n - count; j < n; ++j) {
        std::uniform_int_distribution<std::uint64_t> pick(0, j);
        const auto t = pick(rng);
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    return {chosen.begin(), chosen.end()};
}

/// Test workload: equal share per predicate count, then per attribute
/// combination, with value tuples drawn without replacement from the observed
/// per-attribute domains. A combination never yields more queries than its
/// value space holds; unused quota moves to the other combinations of the
/// same size. Zero-selectivity queries are kept.
inline std::vector<LabeledQuery> generate_test_workload(const Relation& relation, std::size_t total, Rng& rng) {
    const std::size_t m = relation.num_attributes();
    const auto per_count = allocate_per_count(m, total);
    std::vector<std::vector<Code>> observed(m);
    for (std::size_t a = 0; a < m; ++a) {
        std::vector<bool> seen(relation.attribute(a).domain_size, false);
        for (Code c : relation.column(a)) seen[c] = true;
        for (std::size_t c = 0; c < seen.size(); ++c) {
            if (seen[c]) observed[a].push_back(static_cast<Code>(c));
        }
    }
    std::vector<LabeledQuery> out;
    for (std::size_t k = 1; k <= m; ++k) {
        const auto combos = combinations(m, k);
        std::vector<std::uint64_t> capacity;
        for (const auto& combo : combos) {
            std::uint64_t cap = 1;
            for (auto a : combo) {
                const std::uint64_t d = observed[a].size();
                cap = (d != 0 && cap > UINT64_MAX / d) ? UINT64_MAX : cap * d;
            }
            capacity.push_back(cap);
        }
        const auto alloc = allocate_round_robin(per_count[k - 1], capacity);
        for (std::size_t ci = 0; ci < combos.size(); ++ci) {
            if (alloc[ci] == 0) continue;
            std::vector<std::uint64_t> picks;
            if (capacity[ci] == UINT64_MAX) {
                // value space too large to index; rejection sampling keeps it distinct
                std::set<std::vector<Code>> seen;
                while (seen.size() < alloc[ci]) {
                    std::vector<Code> v;
                    for (auto a : combos[ci]) {
                        std::uniform_int_distribution<std::size_t> pick(0, observed[a].size() - 1);
                        v.push_back(observed[a][pick(rng)]);
                    }
                    if (!seen.insert(v).second) continue;
                    PointQuery q;
                    for (std::size_t i = 0; i < v.size(); ++i) q.predicates.push_back({combos[ci][i], v[i]});
                    out.push_back({q, 0.0});
                }
                continue;
            }
            picks = sample_without_replacement(capacity[ci], alloc[ci], rng);
            for (auto idx : picks) {
                PointQuery q;
                // mixed radix, last attribute fastest
                std::vector<Code> v(k);
                for (std::size_t i = k; i-- > 0;) {
                    const auto d = observed[combos[ci][i]].size();
                    v[i] = observed[combos[ci][i]][idx % d];
                    idx /= d;
                }
                for (std::size_t i = 0; i < k; ++i) q.predicates.push_back({combos[ci][i], v[i]});
                out.push_back({q, 0.0});
            }
        }
    }
    for (auto& lq : out) lq.selectivity = true_selectivity(relation, lq.query);
    return out;
}

// ---------------------------------------------------------------------------
// baselines

/// Per-attribute marginal frequencies for attribute-value independence.
struct Marginals {
    std::vector<std::vector<double>> frequency;

    static Marginals of(const Relation& relation) {
        Marginals h;
        const auto n = static_cast<double>(relation.num_rows());
        for (std::size_t a = 0; a < relation.num_attributes(); ++a) {
            std::vector<double> f(relation.attribute(a).domain_size, 0.0);
            for (Code c : relation.column(a)) f[c] += 1.0;
            for (auto& x : f) x /= n;
            h.frequency.push_back(std::move(f));
        }
        return h;
    }
};

inline double avi_estimate(const Marginals& marginals, const PointQuery& q) {
    double p = 1.0;
    for (const auto& pr : q.predicates) {
        if (pr.attr >= marginals.frequency.size() || pr.code >= marginals.frequency[pr.attr].size()) {
            throw Error("query", "predicate outside the histogram domain");
        }
        p *= marginals.frequency[pr.attr][pr.code];
    }
    return p;
}

/// Bernoulli row sample kept as a relation with the parent's schema.
struct RowSample {
    Relation rows;
    double rate = 0.0;
    std::uint64_t seed = 0;
    /// zero-match estimate is 1 / (floor_divisor * |S|)
    double floor_divisor = 2.0;
};

inline RowSample draw_sample(const Relation& relation, double rate, std::uint64_t seed) {
    if (!(rate > 0.0) || rate > 1.0) throw Error("domain", "sample rate must lie in (0, 1]");
    Rng rng = make_rng(seed, 0);
    std::bernoulli_distribution keep(rate);
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < relation.num_rows(); ++r) {
        if (keep(rng)) rows.push_back(r);
    }
    return {relation.select_rows(rows), rate, seed, 2.0};
}

struct SampleEstimate {
    double selectivity = 0.0;
    bool floored = false;
};

inline SampleEstimate sample_estimate(const RowSample& sample, const PointQuery& q) {
    const auto n = sample.rows.num_rows();
    if (n == 0) throw Error("domain", "empty sample");
    const auto matches = count_matches(sample.rows, q);
    if (matches == 0) return {1.0 / (sample.floor_divisor * static_cast<double>(n)), true};
    return {static_cast<double>(matches) / static_cast<double>(n), false};
}

// ---------------------------------------------------------------------------
// reports

struct Percentiles {
    double p5 = 0, p25 = 0, p50 = 0, p75 = 0, p95 = 0;
};

inline Percentiles summarize(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return {percentile_sorted(values, 5), percentile_sorted(values, 25), percentile_sorted(values, 50),
            percentile_sorted(values, 75), percentile_sorted(values, 95)};
}

struct QueryRecord {
    std::string query;
    std::size_t predicates = 0;
    double truth = 0.0;
    double estimate = 0.0;
    double qerror = 0.0;  ///< 0 for excluded zero-truth queries
    bool excluded = false;
    std::uint64_t jpd = 0;
    double entropy = 0.0;
};

struct GroupSummary {
    std::string group;
    Percentiles q;
    std::size_t count = 0;
};

struct ReportOptions {
    /// Selectivity band edges; bands are [-inf, e0), [e0, e1), ... [e_last, inf).
    std::vector<double> selectivity_edges = {0.001, 0.01, 0.05};
    /// q-error estimates are raised to this floor before comparison
    double floor = 0.0;
};

struct QErrorReport {
    std::string estimator;
    std::vector<QueryRecord> records;
    std::vector<GroupSummary> groups;
    std::size_t excluded_zero = 0;

    const GroupSummary* group(const std::string& name) const {
        for (const auto& g : groups) {
            if (g.group == name) return &g;
        }
        return nullptr;
    }
};

inline std::string describe(const Schema& schema, const PointQuery& q) {
    std::string s;
    for (const auto& p : q.predicates) {
        if (!s.empty()) s += " & ";
        const auto& meta = schema.at(p.attr);
        s += meta.name + "=" + (p.code < meta.dictionary.size() ? meta.dictionary[p.code] : std::to_string(p.code));
    }
    return s;
}

namespace detail {

inline std::string percent(double v) {
    std::ostringstream os;
    os << v * 100.0 << "%";
    return os.str();
}

inline std::string selectivity_band(double s, const std::vector<double>& edges) {
    if (edges.empty()) return "selectivity:all";
    if (s < edges.front()) return "selectivity:<" + percent(edges.front());
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (s < edges[i]) return "selectivity:" + percent(edges[i - 1]) + "-" + percent(edges[i]);
    }
    return "selectivity:>=" + percent(edges.back());
}

inline std::string jpd_band(std::uint64_t jpd) {
    const int d = static_cast<int>(std::floor(std::log10(static_cast<double>(jpd)) + 1e-12));
    return "jpd:1e" + std::to_string(d) + "-1e" + std::to_string(d + 1);
}

/// Entropy bands double in width: [0,1), [1,2), [2,4), [4,8), ...
inline std::string entropy_band(double h) {
    if (h < 1.0) return "entropy:0-1";
    int lo = 1;
    while (h >= 2.0 * lo) lo *= 2;
    return "entropy:" + std::to_string(lo) + "-" + std::to_string(2 * lo);
}

}  // namespace detail

/// Per-query records plus percentile summaries over all included queries and
/// per predicate count, selectivity band, JPD size band and entropy band.
/// Zero-truth queries are recorded but kept out of every group.
inline QErrorReport build_report(std::string estimator, std::span<const LabeledQuery> queries,
                                 std::span<const double> estimates, const Relation& relation,
                                 const ReportOptions& options = {}) {
    if (queries.size() != estimates.size()) throw Error("domain", "query and estimate counts differ");
    QErrorReport report;
    report.estimator = std::move(estimator);
    std::map<std::vector<std::size_t>, double> entropy_cache;
    // group key -> (dimension order, label) so groups print in a stable order
    std::map<std::pair<int, std::string>, std::vector<double>> buckets;
    std::map<std::string, double> band_order;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& lq = queries[i];
        QueryRecord rec;
        rec.query = describe(relation.schema(), lq.query);
        rec.predicates = lq.query.predicates.size();
        rec.truth = lq.selectivity;
        rec.estimate = estimates[i];
        std::vector<std::size_t> attrs;
        for (const auto& p : lq.query.predicates) attrs.push_back(p.attr);
        std::sort(attrs.begin(), attrs.end());
        if (!attrs.empty()) {
            rec.jpd = jpd_size(relation.schema(), attrs);
            auto it = entropy_cache.find(attrs);
            if (it == entropy_cache.end()) it = entropy_cache.emplace(attrs, joint_entropy(relation, attrs)).first;
            rec.entropy = it->second;
        }
        if (lq.zero()) {
            rec.excluded = true;
            ++report.excluded_zero;
            report.records.push_back(std::move(rec));
            continue;
        }
        rec.qerror = qerror(rec.truth, rec.estimate, options.floor);
        buckets[{0, "all"}].push_back(rec.qerror);
        buckets[{1, "predicates:" + std::to_string(rec.predicates)}].push_back(rec.qerror);
        const auto sb = detail::selectivity_band(rec.truth, options.selectivity_edges);
        buckets[{2, sb}].push_back(rec.qerror);
        band_order.emplace(sb, rec.truth);
        band_order[sb] = std::min(band_order[sb], rec.truth);
        if (!attrs.empty()) {
            const auto jb = detail::jpd_band(rec.jpd);
            buckets[{3, jb}].push_back(rec.qerror);
            band_order.emplace(jb, static_cast<double>(rec.jpd));
            band_order[jb] = std::min(band_order[jb], static_cast<double>(rec.jpd));
            const auto eb = detail::entropy_band(rec.entropy);
            buckets[{4, eb}].push_back(rec.qerror);
            band_order.emplace(eb, rec.entropy);
            band_order[eb] = std::min(band_order[eb], rec.entropy);
        }
        report.records.push_back(std::move(rec));
    }
    // numeric order inside each dimension
    std::vector<std::tuple<int, double, std::string>> keys;
    for (const auto& [key, values] : buckets) {
        double order = 0.0;
        if (key.first == 1) order = std::stod(key.second.substr(std::string("predicates:").size()));
        else if (key.first >= 2) order = band_order[key.second];
        keys.emplace_back(key.first, order, key.second);
    }
    std::sort(keys.begin(), keys.end());
    // bands are ordered by their smallest member, which is monotone in the band edges
    for (const auto& [dim, order, name] : keys) {
        auto& values = buckets[{dim, name}];
        report.groups.push_back({name, summarize(values), values.size()});
    }
    return report;
}

inline nlohmann::ordered_json to_json(const QErrorReport& report) {
    nlohmann::ordered_json j;
    j["estimator"] = report.estimator;
    j["excluded_zero_selectivity"] = report.excluded_zero;
    auto& groups = j["groups"] = nlohmann::ordered_json::array();
    for (const auto& g : report.groups) {
        groups.push_back({{"group", g.group},
                          {"p5", g.q.p5},
                          {"p25", g.q.p25},
                          {"p50", g.q.p50},
                          {"p75", g.q.p75},
                          {"p95", g.q.p95},
                          {"count", g.count}});
    }
    auto& records = j["records"] = nlohmann::ordered_json::array();
    for (const auto& r : report.records) {
        nlohmann::ordered_json rec{{"query", r.query},     {"predicates", r.predicates}, {"selectivity", r.truth},
                                   {"estimate", r.estimate}, {"jpd", r.jpd},             {"entropy", r.entropy}};
        if (r.excluded) rec["excluded"] = true;
        else rec["qerror"] = r.qerror;
        records.push_back(std::move(rec));
    }
    return j;
}

inline std::string to_csv(const QErrorReport& report) {
    std::string out = csv::format_row({"estimator", "group", "p5", "p25", "p50", "p75", "p95", "count"});
    for (const auto& g : report.groups) {
        out += csv::format_row({report.estimator, g.group, format_number(g.q.p5), format_number(g.q.p25),
                                format_number(g.q.p50), format_number(g.q.p75), format_number(g.q.p95),
                                std::to_string(g.count)});
    }
    return out;
}

}  // namespace selest::eval
