#include <gtest/gtest.h>

#include <map>

#include "selest/eval.hpp"
#include "selest/supervised.hpp"
#include "selest/synthetic.hpp"

using namespace selest;
using namespace selest::supervised;

namespace {

Relation skewed_pair(std::size_t n) {
    std::vector<std::vector<Code>> rows;
    for (std::size_t i = 0; i < n; ++i) {
        const Code a = i % 10 < 6 ? 0 : (i % 10 < 9 ? 1 : 2);
        const Code b = i % 7 < 4 ? a : static_cast<Code>((a + 1) % 3);
        rows.push_back({a, b, static_cast<Code>(i % 2)});
    }
    return make_relation({"a", "b", "c"}, rows, {3, 3, 2});
}

}  // namespace

TEST(TrainingSet, SinglesFirstThenDistinctMulti) {
    auto rel = skewed_pair(700);
    Rng rng(1);
    auto set = generate_training_set(rel, 40, rng);
    ASSERT_GE(set.size(), 8u);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(predicate_count(set[i].query), 1u);
    std::set<PointQuery> distinct;
    for (const auto& tq : set) {
        EXPECT_TRUE(distinct.insert(std::get<PointQuery>(tq.query)).second);
        EXPECT_DOUBLE_EQ(tq.selectivity, true_selectivity(rel, tq.query));
        EXPECT_GT(tq.selectivity, 0.0);
    }
    EXPECT_THROW(generate_training_set(rel, 7, rng), Error);
}

// Queries copy values from a random row, so a value combination is picked in
// proportion to its selectivity.
TEST(TrainingSet, PickFrequencyTracksSelectivity) {
    auto rel = skewed_pair(700);
    Rng rng(2);
    std::map<PointQuery, int> picks;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        PointQuery q;
        do q = sample_query_from_row(rel, 2, rng);
        while (!(q.predicates[0].attr == 0 && q.predicates[1].attr == 1));
        ++picks[q];
    }
    for (const auto& [q, c] : picks) EXPECT_NEAR(c / static_cast<double>(draws), true_selectivity(rel, q), 0.03);
}

TEST(Augment, ProfileWeights) {
    Schema schema(2);
    schema[0].name = "a";
    schema[0].domain_size = 2;
    schema[1].name = "b";
    schema[1].domain_size = 2;
    std::vector<PointQuery> wl;
    for (int i = 0; i < 50; ++i) wl.push_back(PointQuery{{{0, 0}, {1, 0}}});
    for (int i = 0; i < 50; ++i) wl.push_back(PointQuery{{{0, 0}}});
    auto p = profile_workload(schema, wl);
    EXPECT_NEAR(p.attribute_weights[0], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(p.attribute_weights[1], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(p.value_weights[0][0], 100.0 / 101.0, 1e-12);
    EXPECT_NEAR(p.value_weights[0][1], 1.0 / 101.0, 1e-12);
    EXPECT_NEAR(p.predicate_count_weights[1], 0.5, 1e-12);
}

TEST(Augment, WeightsAndOrigins) {
    auto rel = synthetic::census_like(2000, 3);
    Rng rng(3);
    std::vector<PointQuery> wl;
    for (std::size_t i = 0; i < 20; ++i) wl.push_back(sample_query_from_row(rel, 1 + i % 3, rng));
    std::set<PointQuery> uniq(wl.begin(), wl.end());
    auto set = augment_workload(rel, wl, 100, rng);
    std::size_t base = 0, aug = 0;
    for (const auto& tq : set) (tq.origin == QueryOrigin::workload ? base : aug)++;
    EXPECT_EQ(base, uniq.size());
    ASSERT_GT(aug, 0u);
    for (const auto& tq : set) {
        const double expected = tq.origin == QueryOrigin::augmented ? 20.0 / static_cast<double>(aug) : 1.0;
        EXPECT_DOUBLE_EQ(tq.weight, expected);
    }
    EXPECT_THROW(augment_workload(rel, wl, 10, rng), Error);
}

TEST(Refresh, LabelsFollowTheData) {
    auto rel = skewed_pair(70);
    Rng rng(4);
    auto set = generate_training_set(rel, 20, rng);
    auto same = refresh_selectivities(set, rel);
    ASSERT_EQ(same.queries.size(), set.size());
    for (std::size_t i = 0; i < set.size(); ++i) EXPECT_EQ(same.queries[i].selectivity, set[i].selectivity);
    auto doubled = refresh_selectivities(set, rel.concat(rel));
    for (std::size_t i = 0; i < set.size(); ++i) EXPECT_DOUBLE_EQ(doubled.queries[i].selectivity, set[i].selectivity);
    // appending a row that matches {a=2} raises that label
    auto extra = rel.concat(make_relation({"a", "b", "c"}, {{2, 2, 0}}, {3, 3, 2}));
    PointQuery a2{{{0, 2}}};
    TrainingSet one{{a2, true_selectivity(rel, a2), 1.0, QueryOrigin::workload}};
    EXPECT_GT(refresh_selectivities(one, extra).queries[0].selectivity, one[0].selectivity);
    auto other = make_relation({"x"}, {{0}}, {1});
    EXPECT_THROW(refresh_selectivities(set, other), Error);
}

TEST(Regressor, MemorizesTinySet) {
    auto rel = synthetic::census_like(2000, 5);
    Rng rng(5);
    auto set = generate_training_set(rel, 50, rng);
    set.push_back({PointQuery{}, 1.0, 1.0, QueryOrigin::workload});
    set.resize(50);
    set.push_back({PointQuery{}, 1.0, 1.0, QueryOrigin::workload});
    SupervisedConfig cfg;
    cfg.epochs = 600;
    cfg.batch_size = 16;
    cfg.learning_rate = 3e-3;
    cfg.validation_fraction = 0.0;
    auto f = QueryFeaturizer::for_relation(rel, QueryLayout::point);
    auto model = train_supervised(set, f, rel.num_rows(), cfg);
    std::vector<double> q;
    for (const auto& tq : set) q.push_back(eval::qerror(tq.selectivity, estimate(model, tq.query)));
    EXPECT_LE(eval::median(q), 1.2);
    // selectivity 1 sits on the transform boundary, which the sigmoid only approaches
    EXPECT_LE(eval::qerror(1.0, estimate(model, Query{PointQuery{}})), 2.0);
}

TEST(Regressor, EpochsZeroAndBounds) {
    auto rel = synthetic::census_like(500, 6);
    Rng rng(6);
    auto set = generate_training_set(rel, 60, rng);
    SupervisedConfig cfg;
    cfg.epochs = 0;
    auto f = QueryFeaturizer::for_relation(rel, QueryLayout::point);
    auto a = train_supervised(set, f, rel.num_rows(), cfg);
    auto b = train_supervised(set, f, rel.num_rows(), cfg);
    EXPECT_EQ(a.network.layers[0].weights, b.network.layers[0].weights);
    EXPECT_TRUE(a.train_curve.empty());
    cfg.epochs = 3;
    auto trained = train_supervised(set, f, rel.num_rows(), cfg);
    std::vector<Query> qs;
    for (int i = 0; i < 20000; ++i) qs.emplace_back(sample_query_from_row(rel, 1 + i % 6, rng));
    for (double e : estimate_batch(trained, qs)) {
        EXPECT_GE(e, trained.floor);
        EXPECT_LE(e, 1.0);
    }
    EXPECT_THROW(estimate(trained, Query{PointQuery{{{0, 99}}}}), Error);
}

TEST(Regressor, IncrementalNoOpsAndMismatch) {
    auto rel = synthetic::census_like(500, 7);
    Rng rng(7);
    auto set = generate_training_set(rel, 60, rng);
    SupervisedConfig cfg;
    cfg.epochs = 2;
    auto f = QueryFeaturizer::for_relation(rel, QueryLayout::point);
    auto model = train_supervised(set, f, rel.num_rows(), cfg);
    auto same = incremental_train_supervised(model, {});
    EXPECT_EQ(same.network.layers[0].weights, model.network.layers[0].weights);
    IncrementalSupervisedConfig inc;
    inc.epochs = 0;
    EXPECT_EQ(incremental_train_supervised(model, set, inc).network.layers[0].weights, model.network.layers[0].weights);
    auto range_f = QueryFeaturizer::for_relation(rel, QueryLayout::range);
    EXPECT_THROW(incremental_train_supervised(model, set, {}, &range_f), Error);
    auto moved = incremental_train_supervised(model, set);
    EXPECT_NE(moved.network.layers[0].weights, model.network.layers[0].weights);
}

TEST(RangeTraining, BucketRangesAreLabeled) {
    auto rel = synthetic::census_like(1000, 8);
    Rng rng(8);
    auto set = generate_range_training_set(rel, 200, rng);
    ASSERT_FALSE(set.empty());
    for (const auto& tq : set) {
        EXPECT_TRUE(std::holds_alternative<ValueRangeQuery>(tq.query));
        EXPECT_DOUBLE_EQ(tq.selectivity, true_selectivity(rel, tq.query));
    }
}
