#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "selest/csv.hpp"
#include "selest/relation.hpp"

using namespace selest;

namespace {

Relation ingest_text(const std::string& text, const SchemaHints& hints = {}) {
    return ingest_table(csv::parse(text), hints);
}

std::string error_kind_of(const std::function<void()>& fn, std::string* message = nullptr) {
    try {
        fn();
    } catch (const Error& e) {
        if (message) *message = e.what();
        return e.kind();
    }
    return "";
}

Relation numeric_column(const std::vector<double>& values) {
    std::string text = "v\n";
    for (double v : values) text += format_number(v) + "\n";
    return ingest_text(text);
}

}  // namespace

TEST(Csv, QuotedFieldsAndCrLf) {
    auto t = csv::parse("a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\r\n\r\nz,\n");
    ASSERT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][0], "x,1");
    EXPECT_EQ(t.rows[0][1], "say \"hi\"");
    EXPECT_EQ(t.rows[1][1], "");
}

TEST(Csv, FormatRowRoundTrips) {
    std::vector<std::string> row{"plain", "with,comma", "with \"quote\"", ""};
    auto t = csv::parse(csv::format_row({"a", "b", "c", "d"}) + csv::format_row(row));
    EXPECT_EQ(t.rows.at(0), row);
}

TEST(Ingest, DictionaryInFirstAppearanceOrder) {
    auto rel = ingest_text("c,n\na,1\nb,2\na,3\n");
    EXPECT_EQ(rel.num_rows(), 3u);
    EXPECT_EQ(rel.attribute(0).kind, AttributeKind::categorical);
    EXPECT_EQ(rel.attribute(0).domain_size, 2u);
    EXPECT_EQ(rel.attribute(0).dictionary, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(rel.attribute(1).kind, AttributeKind::numeric);
    EXPECT_EQ(rel.attribute(1).domain_size, 0u);  // pending discretization
    EXPECT_EQ(std::vector<Code>(rel.column(0).begin(), rel.column(0).end()), (std::vector<Code>{0, 1, 0}));
    EXPECT_THROW(rel.column(1), Error);
}

TEST(Ingest, EmptyCellIsAValue) {
    auto rel = ingest_text("c\nx\n\"\"\nx\ny\n");
    EXPECT_EQ(rel.attribute(0).domain_size, 3u);
    EXPECT_EQ(rel.attribute(0).dictionary[1], "");
}

TEST(Ingest, HeaderOnlyIsEmptyRelation) {
    std::string msg;
    EXPECT_EQ(error_kind_of([] { ingest_text("a,b\n"); }, &msg), "parse");
    EXPECT_NE(msg.find("empty relation"), std::string::npos);
}

TEST(Ingest, RaggedRowCitesRow) {
    std::string msg;
    EXPECT_EQ(error_kind_of([] { ingest_text("a,b\n1,2\n3,4\n5,6\n7,8\n9\n"); }, &msg), "parse");
    EXPECT_NE(msg.find("row 5"), std::string::npos) << msg;
}

TEST(Ingest, UnparseableNumericCellNamesColumnAndRow) {
    SchemaHints hints;
    hints["n"] = ColumnHint{AttributeKind::numeric, std::nullopt};
    std::string msg;
    EXPECT_EQ(error_kind_of([&] { ingest_text("n\n1\n2\nabc\n", hints); }, &msg), "parse");
    EXPECT_NE(msg.find("'n'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
}

TEST(Ingest, HintForcesCategorical) {
    SchemaHints hints;
    hints["n"] = ColumnHint{AttributeKind::categorical, std::nullopt};
    auto rel = ingest_text("n\n3\n1\n3\n", hints);
    EXPECT_EQ(rel.attribute(0).kind, AttributeKind::categorical);
    EXPECT_EQ(rel.attribute(0).dictionary, (std::vector<std::string>{"3", "1"}));
}

TEST(EquiDepth, EqualSplit) {
    auto rel = numeric_column({1, 2, 3, 4});
    auto meta = discretize_equidepth(rel, 0, 2);
    ASSERT_EQ(meta.buckets.size(), 2u);
    EXPECT_EQ(meta.buckets[0], (Bucket{1, 2, 2, 2}));
    EXPECT_EQ(meta.buckets[1], (Bucket{3, 4, 2, 2}));
    EXPECT_EQ(meta.domain_size, 2u);
}

TEST(EquiDepth, NeverSplitsEqualRuns) {
    auto meta = discretize_equidepth(numeric_column({1, 1, 1, 9}), 0, 2);
    ASSERT_EQ(meta.buckets.size(), 2u);
    EXPECT_EQ(meta.buckets[0], (Bucket{1, 1, 1, 3}));
    EXPECT_EQ(meta.buckets[1], (Bucket{9, 9, 1, 1}));
}

TEST(EquiDepth, SingleBucketSpansAll) {
    auto meta = discretize_equidepth(numeric_column({5, 3, 3, 8, 1}), 0, 1);
    ASSERT_EQ(meta.buckets.size(), 1u);
    EXPECT_EQ(meta.buckets[0], (Bucket{1, 8, 4, 5}));
}

TEST(EquiDepth, Errors) {
    EXPECT_EQ(error_kind_of([] { discretize_equidepth(numeric_column({1, 1, 2}), 0, 3); }), "domain");
    auto rel = ingest_text("c\na\nb\n");
    EXPECT_EQ(error_kind_of([&] { discretize_equidepth(rel, 0, 1); }), "schema");
}

// Oracle: sort, cut when the running count reaches ceil(n(b+1)/k), extend over
// equal values, and cut early when only as many distinct values remain as buckets.
TEST(EquiDepth, MatchesSortOracleOnRandomColumns) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> size(1, 60), value(0, 25);
        std::vector<double> values(size(rng));
        for (auto& v : values) v = value(rng);
        std::vector<double> sorted = values;
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> uniq = sorted;
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        std::uniform_int_distribution<std::size_t> kdist(1, uniq.size());
        const std::size_t k = kdist(rng);

        auto rel = numeric_column(values);
        auto meta = discretize_equidepth(rel, 0, k);
        ASSERT_EQ(meta.buckets.size(), k);
        // independent reconstruction of bucket boundaries
        const std::size_t n = sorted.size();
        std::vector<std::pair<double, double>> expected;
        std::size_t i = 0;
        std::size_t used_distinct = 0;
        for (std::size_t b = 0; b < k; ++b) {
            const double lo = sorted[i];
            const std::size_t boundary = (n * (b + 1) + k - 1) / k;
            double hi = lo;
            while (i < n) {
                hi = sorted[i];
                while (i < n && sorted[i] == hi) ++i;
                ++used_distinct;
                const std::size_t left_distinct = uniq.size() - used_distinct;
                const std::size_t left_buckets = k - b - 1;
                if (left_buckets == 0) continue;
                if (i >= boundary || left_distinct == left_buckets) break;
            }
            expected.emplace_back(lo, hi);
        }
        std::uint64_t rows = 0;
        for (std::size_t b = 0; b < k; ++b) {
            EXPECT_EQ(meta.buckets[b].lo, expected[b].first);
            EXPECT_EQ(meta.buckets[b].hi, expected[b].second);
            rows += meta.buckets[b].row_count;
            EXPECT_LE(meta.buckets[b].distinct_count, meta.buckets[b].row_count);
            if (b > 0) {
                EXPECT_LT(meta.buckets[b - 1].hi, meta.buckets[b].lo);
            }
        }
        EXPECT_EQ(rows, n);
        for (double v : values) EXPECT_TRUE(meta.bucket_of(v).has_value());
    }
}

TEST(EncodeNumeric, BucketsBecomeCodes) {
    auto rel = encode_numeric_attributes(numeric_column({1, 2, 3, 4}), 2);
    EXPECT_EQ(std::vector<Code>(rel.column(0).begin(), rel.column(0).end()), (std::vector<Code>{0, 0, 1, 1}));
    EXPECT_EQ(rel.attribute(0).dictionary, (std::vector<std::string>{"1..2", "3..4"}));
    // default bucket count is capped by the distinct count
    auto few = encode_numeric_attributes(numeric_column({7, 7, 8}), 16);
    EXPECT_EQ(few.attribute(0).domain_size, 2u);
    EXPECT_EQ(few.attribute(0).dictionary, (std::vector<std::string>{"7", "8"}));
}

TEST(EncodeWithSchema, RejectsUnseenValues) {
    auto rel = encode_numeric_attributes(ingest_text("c,n\na,1\nb,5\n"), 2);
    auto ok = encode_with_schema(csv::parse("c,n\nb,3\na,5\n"), rel.schema());
    EXPECT_EQ(ok.code(0, 0), 1u);
    EXPECT_EQ(ok.code(0, 1), 0u);  // 3 lies between buckets and joins the left one
    std::string msg;
    EXPECT_EQ(error_kind_of([&] { encode_with_schema(csv::parse("c,n\nz,1\n"), rel.schema()); }, &msg), "domain");
    EXPECT_NE(msg.find("retrain"), std::string::npos);
    EXPECT_EQ(error_kind_of([&] { encode_with_schema(csv::parse("c,n\na,9\n"), rel.schema()); }), "domain");
    EXPECT_EQ(error_kind_of([&] { encode_with_schema(csv::parse("x,n\na,1\n"), rel.schema()); }), "schema");
}

TEST(Fingerprint, SensitiveToNamesAndDictionaries) {
    auto a = ingest_text("c\nx\ny\n");
    auto b = ingest_text("c\ny\nx\n");
    auto c = ingest_text("d\nx\ny\n");
    EXPECT_EQ(schema_fingerprint(a.schema()), schema_fingerprint(ingest_text("c\nx\ny\nx\n").schema()));
    EXPECT_NE(schema_fingerprint(a.schema()), schema_fingerprint(b.schema()));
    EXPECT_NE(schema_fingerprint(a.schema()), schema_fingerprint(c.schema()));
}

TEST(TrueSelectivity, Basics) {
    // fixed fixture: value 3 occurs in 7 of 50 rows
    std::vector<std::vector<Code>> rows;
    for (int i = 0; i < 50; ++i) rows.push_back({static_cast<Code>(i < 7 ? 3 : i % 3), static_cast<Code>(i % 2)});
    auto rel = make_relation({"a", "b"}, rows, {5, 2});
    EXPECT_DOUBLE_EQ(true_selectivity(rel, PointQuery{}), 1.0);
    EXPECT_DOUBLE_EQ(true_selectivity(rel, PointQuery{{{0, 3}}}), 0.14);
    EXPECT_DOUBLE_EQ(true_selectivity(rel, PointQuery{{{0, 4}}}), 0.0);
    EXPECT_THROW(true_selectivity(rel, PointQuery{{{0, 5}}}), Error);
    EXPECT_THROW(true_selectivity(rel, PointQuery{{{0, 1}, {0, 2}}}), Error);
}

TEST(TrueSelectivity, RangeMonotoneAndIntegral) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<Code> c(0, 5);
    std::vector<std::vector<Code>> rows(300);
    for (auto& r : rows) r = {c(rng), c(rng), c(rng)};
    auto rel = make_relation({"a", "b", "c"}, rows, {6, 6, 6});
    for (int t = 0; t < 200; ++t) {
        RangeQuery q;
        for (std::size_t a = 0; a < 3; ++a) {
            Code x = c(rng), y = c(rng);
            q.predicates.push_back({a, std::min(x, y), std::max(x, y)});
        }
        const double s = true_selectivity(rel, q);
        EXPECT_DOUBLE_EQ(s * 300, std::round(s * 300));
        auto wider = q;
        auto& p = wider.predicates[static_cast<std::size_t>(t % 3)];
        if (p.lo > 0) --p.lo;
        if (p.hi < 5) ++p.hi;
        EXPECT_GE(true_selectivity(rel, wider), s);
    }
}

TEST(TrueSelectivity, ValueRangesOnRawNumbers) {
    auto rel = encode_numeric_attributes(ingest_text("n,c\n1,a\n2,b\n3,a\n10,a\n"), 2);
    EXPECT_DOUBLE_EQ(true_selectivity(rel, ValueRangeQuery{{{0, 2, 3}}}), 0.5);
    EXPECT_DOUBLE_EQ(true_selectivity(rel, ValueRangeQuery{{{0, 2, 10}, {1, 0, 0}}}), 0.5);
}

TEST(Jpd, ProductOfDomains) {
    auto rel = make_relation({"a", "b", "c", "d", "e", "f", "g", "h"}, {{0, 0, 0, 0, 0, 0, 0, 0}}, {4, 3, 4, 4, 4, 4, 4, 7});
    std::vector<std::size_t> ab{0, 1}, h{7}, all{0, 2, 3, 4, 5, 6};
    EXPECT_EQ(jpd_size(rel.schema(), ab), 12u);
    EXPECT_EQ(jpd_size(rel.schema(), h), 7u);
    std::vector<std::size_t> fours{0, 2, 3, 4, 5, 6};
    EXPECT_EQ(jpd_size(rel.schema(), fours), 4096u);
    auto eight = make_relation({"a", "b", "c", "d", "e", "f", "g", "h"}, {{0, 0, 0, 0, 0, 0, 0, 0}}, {4, 4, 4, 4, 4, 4, 4, 4});
    std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7};
    EXPECT_EQ(jpd_size(eight.schema(), idx), 65536u);
}

TEST(Entropy, Examples) {
    std::vector<std::vector<Code>> rows;
    for (int i = 0; i < 40; ++i) rows.push_back({0, static_cast<Code>(i % 4), static_cast<Code>(i % 4)});
    auto rel = make_relation({"const", "u4", "copy"}, rows);
    std::vector<std::size_t> c{0}, u{1}, both{1, 2};
    EXPECT_DOUBLE_EQ(joint_entropy(rel, c), 0.0);
    EXPECT_NEAR(joint_entropy(rel, u), 2.0, 1e-12);
    EXPECT_NEAR(joint_entropy(rel, both), 2.0, 1e-12);
}

TEST(Relation, SelectAndConcat) {
    auto rel = make_relation({"a"}, {{0}, {1}, {2}}, {3});
    std::vector<std::size_t> pick{2, 0};
    auto s = rel.select_rows(pick);
    EXPECT_EQ(s.num_rows(), 2u);
    EXPECT_EQ(s.code(0, 0), 2u);
    auto c = rel.concat(s);
    EXPECT_EQ(c.num_rows(), 5u);
    EXPECT_EQ(c.code(4, 0), 0u);
}
