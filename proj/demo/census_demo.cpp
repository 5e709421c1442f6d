// Trains a small MADE ensemble on the synthetic census-like table and compares
// a few estimates with the true selectivity and attribute value independence.
//
//   demo_census [out.csv]
//
// With an argument the table is also written as CSV, ready for `selest ingest`.

#include <cstdio>
#include <iostream>
#include <string>

#include "selest/eval.hpp"
#include "selest/io.hpp"
#include "selest/made.hpp"
#include "selest/range.hpp"
#include "selest/synthetic.hpp"

using namespace selest;

namespace {

std::size_t attr(const Relation& rel, const std::string& name) {
    for (std::size_t a = 0; a < rel.num_attributes(); ++a) {
        if (rel.attribute(a).name == name) return a;
    }
    throw Error("schema", "no attribute " + name);
}

Code code(const Relation& rel, std::size_t a, const std::string& label) {
    const auto& dict = rel.attribute(a).dictionary;
    for (std::size_t c = 0; c < dict.size(); ++c) {
        if (dict[c] == label) return static_cast<Code>(c);
    }
    throw Error("domain", "no value " + label);
}

}  // namespace

int main(int argc, char** argv) {
    try {
        if (argc > 1) {
            const auto table = synthetic::census_like_table(5000, 2019);
            std::string text = csv::format_row(table.header);
            for (const auto& r : table.rows) text += csv::format_row(r);
            io::write_text(argv[1], text);
            std::cout << "wrote " << argv[1] << "\n";
        }
        const Relation rel = synthetic::census_like();
        made::TrainConfig cfg;
        cfg.epochs = 30;
        const auto ens = made::train(rel, cfg);
        const auto marginals = eval::Marginals::of(rel);

        const auto region = attr(rel, "region"), zone = attr(rel, "zone"), channel = attr(rel, "channel"),
                   tier = attr(rel, "tier");
        const std::vector<std::pair<std::string, PointQuery>> queries{
            {"region=r3 & zone=z3", {{{region, code(rel, region, "r3")}, {zone, code(rel, zone, "z3")}}}},
            {"region=r3 & zone=z1", {{{region, code(rel, region, "r3")}, {zone, code(rel, zone, "z1")}}}},
            {"channel=c2 & tier=t1", {{{channel, code(rel, channel, "c2")}, {tier, code(rel, tier, "t1")}}}},
            {"region=r0 & channel=c0 & tier=t0",
             {{{region, code(rel, region, "r0")}, {channel, code(rel, channel, "c0")}, {tier, code(rel, tier, "t0")}}}},
        };
        std::printf("%-34s %10s %10s %10s\n", "query", "true", "made", "avi");
        for (const auto& [label, q] : queries) {
            const double truth = static_cast<double>(count_matches(rel, q)) / static_cast<double>(rel.num_rows());
            std::printf("%-34s %10.5f %10.5f %10.5f\n", label.c_str(), truth, made::point_selectivity(ens, q),
                        eval::avi_estimate(marginals, q));
        }

        const auto age = attr(rel, "age"), hours = attr(rel, "hours");
        const ValueRangeQuery rq{{{age, 30, 45}, {hours, 20, 35}}};
        const double truth = static_cast<double>(count_matches(rel, rq)) / static_cast<double>(rel.num_rows());
        const double est = range::estimate_bucketed(made::partial_estimator(ens, {age, hours}), rq, rel.schema());
        std::printf("%-34s %10.5f %10.5f\n", "30<=age<=45 & 20<=hours<=35", truth, est);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
