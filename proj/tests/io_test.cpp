#include <gtest/gtest.h>

#include <filesystem>

#include "selest/io.hpp"
#include "selest/synthetic.hpp"

using namespace selest;

namespace {

std::string temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "selest_io_test";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

}  // namespace

TEST(RelationFile, RoundTrip) {
    auto rel = synthetic::census_like(300, 1);
    const auto path = temp_path("rel.json");
    io::save_relation(path, rel);
    auto back = io::load_relation(path);
    EXPECT_EQ(back.schema(), rel.schema());
    ASSERT_EQ(back.num_rows(), rel.num_rows());
    for (std::size_t r = 0; r < rel.num_rows(); ++r) EXPECT_EQ(back.tuple(r), rel.tuple(r));
    EXPECT_EQ(io::dump(io::to_json(back)), io::read_text(path));
}

TEST(ModelFile, MadeRoundTripIsByteIdentical) {
    auto rel = synthetic::census_like(300, 2);
    made::TrainConfig c;
    c.epochs = 2;
    c.hidden = {16, 8};
    const auto a = temp_path("made_a.json"), b = temp_path("made_b.json");
    io::save_model(a, io::Model{made::train(rel, c)});
    auto loaded = io::load_model(a);
    io::save_model(b, loaded);
    EXPECT_EQ(io::read_text(a), io::read_text(b));
    const auto& ens = std::get<made::MadeEnsemble>(loaded);
    auto fresh = made::train(rel, c);
    PointQuery q{{{0, 1}, {3, 0}}};
    EXPECT_EQ(made::point_selectivity(ens, q), made::point_selectivity(fresh, q));
    EXPECT_EQ(ens.members[1].ordering, fresh.members[1].ordering);
    EXPECT_EQ(ens.members[1].hidden_degrees, fresh.members[1].hidden_degrees);
}

TEST(ModelFile, SupervisedRoundTripIsByteIdentical) {
    auto rel = synthetic::census_like(300, 3);
    Rng rng(3);
    auto set = supervised::generate_training_set(rel, 60, rng);
    supervised::SupervisedConfig c;
    c.epochs = 2;
    c.hidden = {8, 8};
    auto model = supervised::train_supervised(set, QueryFeaturizer::for_relation(rel, QueryLayout::point), rel.num_rows(), c);
    model.schema = rel.schema();
    const auto a = temp_path("sup_a.json"), b = temp_path("sup_b.json");
    io::save_model(a, io::Model{model});
    auto loaded = io::load_model(a);
    io::save_model(b, loaded);
    EXPECT_EQ(io::read_text(a), io::read_text(b));
    const auto& back = std::get<supervised::SupervisedModel>(loaded);
    EXPECT_EQ(supervised::estimate(back, set[7].query), supervised::estimate(model, set[7].query));
}

TEST(ModelFile, VersionAndFingerprintFailClosed) {
    auto rel = synthetic::census_like(300, 4);
    made::TrainConfig c;
    c.epochs = 0;
    c.hidden = {4};
    auto j = io::to_json(io::Model{made::train(rel, c)});
    auto bad_version = j;
    bad_version["version"] = 99;
    EXPECT_THROW(io::model_from_json(bad_version), Error);
    auto bad_print = j;
    bad_print["schema_fingerprint"] = "0000000000000000";
    try {
        io::model_from_json(bad_print);
        FAIL() << "expected a fingerprint error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), "format");
    }
    auto other = make_relation({"x"}, {{0}, {1}});
    EXPECT_THROW(io::require_same_schema(rel.schema(), other.schema()), Error);
}

TEST(QueryFile, ParsesLabelsRangesAndCitesLines) {
    auto rel = synthetic::census_like(300, 5);
    const auto& schema = rel.schema();
    auto lines = io::parse_query_lines(
        "{\"predicates\": {\"region\": \"r1\", \"channel\": \"c0\"}, \"selectivity\": 0.1}\n"
        "\n"
        "{\"predicates\": {\"age\": [20, 40], \"region\": \"r2\"}}\n",
        schema);
    ASSERT_EQ(lines.size(), 2u);
    const auto& p = std::get<PointQuery>(lines[0].query);
    EXPECT_EQ(p.predicates.size(), 2u);
    EXPECT_EQ(*lines[0].selectivity, 0.1);
    const auto& v = std::get<ValueRangeQuery>(lines[1].query);
    EXPECT_EQ(v.predicates.size(), 2u);
    EXPECT_FALSE(lines[1].selectivity.has_value());
    try {
        io::parse_query_lines("{\"predicates\": {}}\n{\"predicates\": {\"nope\": \"x\"}}\n", schema, "q.jsonl");
        FAIL() << "expected a parse error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("q.jsonl line 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(io::parse_query_lines("{not json\n", schema), Error);
}

TEST(QueryFile, FormatRoundTrip) {
    auto rel = synthetic::census_like(300, 6);
    Rng rng(6);
    auto lines = io::to_lines(supervised::generate_training_set(rel, 80, rng));
    lines.push_back({ValueRangeQuery{{{4, 18, 35.5}}}, 0.2, 1.0, supervised::QueryOrigin::workload});
    const auto text = io::format_query_lines(lines, rel.schema());
    auto back = io::parse_query_lines(text, rel.schema());
    ASSERT_EQ(back.size(), lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        EXPECT_EQ(back[i].query, lines[i].query);
        EXPECT_EQ(back[i].selectivity, lines[i].selectivity);
        EXPECT_EQ(back[i].origin, lines[i].origin);
    }
    EXPECT_EQ(io::format_query_lines(back, rel.schema()), text);
}
