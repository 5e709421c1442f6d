#pragma once

#include <iostream>
#include <string>
#include <variant>
#include <vector>

#include "selest/csv.hpp"
#include "selest/eval.hpp"
#include "selest/io.hpp"
#include "selest/made.hpp"
#include "selest/range.hpp"
#include "selest/relation.hpp"
#include "selest/supervised.hpp"

// Command implementations behind the selest tool. Each one composes module
// operations and leaves file handling to the caller where practical.
namespace selest::pipeline {

inline bool& quiet() {
    static bool q = false;
    return q;
}

inline void log(const std::string& msg) {
    if (!quiet()) std::cerr << "selest: " << msg << "\n";
}

// --- ingest ------------------------------------------------------------------

struct IngestOptions {
    std::string input;
    char separator = ',';
    std::size_t buckets = 16;
    SchemaHints hints;
};

inline Relation ingest(const IngestOptions& opt) {
    auto table = csv::read_file(opt.input, opt.separator);
    auto raw = ingest_table(table, opt.hints);
    auto rel = encode_numeric_attributes(raw, opt.buckets, opt.hints);
    std::string summary;
    for (const auto& a : rel.schema()) {
        summary += " " + a.name + "(" + to_string(a.kind) + "," + std::to_string(a.domain_size) + ")";
    }
    log("ingested " + std::to_string(rel.num_rows()) + " rows:" + summary);
    return rel;
}

// --- workloads -----------------------------------------------------------------

enum class WorkloadKind { train, test, augment, range };

inline WorkloadKind workload_kind(const std::string& s) {
    if (s == "train") return WorkloadKind::train;
    if (s == "test") return WorkloadKind::test;
    if (s == "augment") return WorkloadKind::augment;
    if (s == "range") return WorkloadKind::range;
    throw Error("config", "unknown workload kind '" + s + "' (expected train, test, augment or range)");
}

inline std::vector<PointQuery> point_queries(const std::vector<io::QueryLine>& lines, const std::string& what) {
    std::vector<PointQuery> out;
    for (const auto& l : lines) {
        const auto* q = std::get_if<PointQuery>(&l.query);
        if (!q) throw Error("query", what + " must contain equality predicates only");
        out.push_back(*q);
    }
    return out;
}

inline std::vector<io::QueryLine> gen_workload(const Relation& relation, WorkloadKind kind, std::size_t budget,
                                               std::uint64_t seed, const std::vector<io::QueryLine>& base = {}) {
    Rng rng = make_rng(seed, 0);
    switch (kind) {
        case WorkloadKind::train: return io::to_lines(supervised::generate_training_set(relation, budget, rng));
        case WorkloadKind::range: return io::to_lines(supervised::generate_range_training_set(relation, budget, rng));
        case WorkloadKind::test: {
            auto wl = eval::generate_test_workload(relation, budget, rng);
            std::size_t zero = 0;
            for (const auto& q : wl) zero += q.zero() ? 1 : 0;
            log("test workload: " + std::to_string(wl.size()) + " queries, " + std::to_string(zero) +
                " with zero selectivity");
            return io::to_lines(wl);
        }
        case WorkloadKind::augment:
            return io::to_lines(supervised::augment_workload(relation, point_queries(base, "the base workload"), budget, rng));
    }
    return {};
}

// --- training ------------------------------------------------------------------

/// Missing labels are computed against the relation; empty queries are dropped.
inline supervised::TrainingSet label(const Relation& relation, const std::vector<io::QueryLine>& lines) {
    supervised::TrainingSet out;
    std::size_t dropped = 0;
    for (const auto& l : lines) {
        const double s = l.selectivity ? *l.selectivity : true_selectivity(relation, l.query);
        if (s > 0.0) out.push_back({l.query, s, l.weight, l.origin});
        else ++dropped;
    }
    if (dropped) log("dropped " + std::to_string(dropped) + " zero-selectivity training queries");
    return out;
}

inline made::MadeEnsemble train_made(const Relation& relation, const made::TrainConfig& config,
                                     const std::vector<io::QueryLine>& workload = {}) {
    std::vector<double> weights;
    if (!workload.empty()) {
        weights = made::training_weights(
            made::tuple_weights_from_workload(relation, point_queries(workload, "a MADE weighting workload")));
    }
    auto ens = made::train(relation, config, weights);
    for (std::size_t i = 0; i < ens.members.size(); ++i) {
        const auto& curve = ens.members[i].loss_curve;
        log("member " + std::to_string(i) + " final loss " + (curve.empty() ? std::string("n/a") : format_number(curve.back())));
    }
    return ens;
}

/// Layout follows the workload: any range query selects the range layout.
inline supervised::SupervisedModel train_supervised(const Relation& relation, const std::vector<io::QueryLine>& workload,
                                                    const supervised::SupervisedConfig& config) {
    bool any_range = false;
    for (const auto& l : workload) any_range = any_range || std::holds_alternative<ValueRangeQuery>(l.query);
    const auto featurizer = QueryFeaturizer::for_relation(relation, any_range ? QueryLayout::range : QueryLayout::point);
    auto model = supervised::train_supervised(label(relation, workload), featurizer, relation.num_rows(), config);
    model.schema = relation.schema();
    if (!model.train_curve.empty()) log("final training loss " + format_number(model.train_curve.back()));
    return model;
}

// --- estimation ----------------------------------------------------------------

struct EstimateOptions {
    made::EstimateOptions made;
    std::uint64_t seed = 42;
    std::size_t threads = 1;
};

inline double estimate_one(const io::Model& model, const Query& q, const made::EstimateOptions& opt) {
    if (const auto* ens = std::get_if<made::MadeEnsemble>(&model)) {
        if (const auto* pq = std::get_if<PointQuery>(&q)) return made::point_selectivity(*ens, *pq, opt);
        const auto& vq = std::get<ValueRangeQuery>(q);
        validate(ens->schema, vq);
        std::vector<std::size_t> attrs;
        for (const auto& p : vq.predicates) attrs.push_back(p.attr);
        return range::estimate_bucketed(made::partial_estimator(*ens, attrs, opt), vq, ens->schema);
    }
    return supervised::estimate(std::get<supervised::SupervisedModel>(model), q);
}

/// Query i uses sampling stream derive_seed(seed, i), so results do not
/// depend on the thread count.
inline std::vector<double> estimate(const io::Model& model, const std::vector<Query>& queries, const EstimateOptions& opt) {
    std::vector<double> out(queries.size());
    parallel_for(queries.size(), opt.threads, [&](std::size_t i) {
        auto o = opt.made;
        o.seed = derive_seed(opt.seed, i);
        out[i] = estimate_one(model, queries[i], o);
    });
    return out;
}

// --- evaluation ----------------------------------------------------------------

struct NamedModel {
    std::string name;
    io::Model model;
};

struct EvaluateOptions {
    std::vector<std::string> baselines;
    double sample_rate = 0.01;
    EstimateOptions estimate;
    eval::ReportOptions report;
};

inline std::vector<eval::LabeledQuery> labeled_points(const Relation& relation, const std::vector<io::QueryLine>& lines) {
    std::vector<eval::LabeledQuery> out;
    for (const auto& pq : point_queries(lines, "an evaluation workload")) {
        out.push_back({pq, 0.0});
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        out[i].selectivity = lines[i].selectivity ? *lines[i].selectivity : true_selectivity(relation, out[i].query);
    }
    return out;
}

/// One report per model and baseline, in the order given.
inline std::vector<eval::QErrorReport> evaluate(const Relation& relation, const std::vector<eval::LabeledQuery>& queries,
                                                const std::vector<NamedModel>& models, EvaluateOptions opt) {
    if (opt.report.floor <= 0.0) opt.report.floor = selectivity_floor(relation.num_rows());
    std::vector<eval::QErrorReport> reports;
    std::vector<Query> as_queries;
    for (const auto& lq : queries) as_queries.emplace_back(lq.query);
    for (const auto& nm : models) {
        io::require_same_schema(io::model_schema(nm.model), relation.schema());
        const auto est = estimate(nm.model, as_queries, opt.estimate);
        reports.push_back(eval::build_report(nm.name, queries, est, relation, opt.report));
        log(nm.name + ": median q-error " + format_number(reports.back().groups.empty() ? 0.0 : reports.back().groups.front().q.p50));
    }
    for (const auto& b : opt.baselines) {
        std::vector<double> est;
        if (b == "avi") {
            const auto marginals = eval::Marginals::of(relation);
            for (const auto& lq : queries) est.push_back(eval::avi_estimate(marginals, lq.query));
        } else if (b == "sample") {
            const auto sample = eval::draw_sample(relation, opt.sample_rate, opt.estimate.seed);
            std::size_t floored = 0;
            for (const auto& lq : queries) {
                const auto e = eval::sample_estimate(sample, lq.query);
                floored += e.floored ? 1 : 0;
                est.push_back(e.selectivity);
            }
            log("sample: " + std::to_string(sample.rows.num_rows()) + " rows, " + std::to_string(floored) +
                " estimates floored");
        } else {
            throw Error("config", "unknown estimator '" + b + "' (baselines: avi, sample)");
        }
        reports.push_back(eval::build_report(b, queries, est, relation, opt.report));
    }
    return reports;
}

inline io::Json reports_json(const std::vector<eval::QErrorReport>& reports) {
    io::Json j;
    j["reports"] = io::Json::array();
    for (const auto& r : reports) j["reports"].push_back(eval::to_json(r));
    return j;
}

inline std::string reports_csv(const std::vector<eval::QErrorReport>& reports) {
    std::string out = csv::format_row({"estimator", "group", "p5", "p25", "p50", "p75", "p95", "count"});
    for (const auto& r : reports) {
        const auto body = eval::to_csv(r);
        out += body.substr(body.find('\n') + 1);
    }
    return out;
}

// --- incremental -----------------------------------------------------------------

inline made::MadeEnsemble incremental_made(const made::MadeEnsemble& ens, const Relation& new_rows,
                                           const made::IncrementalConfig& config) {
    io::require_same_schema(ens.schema, new_rows.schema());
    auto out = made::incremental_train(ens, new_rows, config);
    log("fine-tuned on " + std::to_string(new_rows.num_rows()) + " new rows");
    return out;
}

inline supervised::SupervisedModel incremental_supervised(const supervised::SupervisedModel& model,
                                                          const std::vector<io::QueryLine>& lines,
                                                          const Relation* relation,
                                                          const supervised::IncrementalSupervisedConfig& config) {
    supervised::TrainingSet set;
    if (relation) {
        io::require_same_schema(model.schema, relation->schema());
        set = label(*relation, lines);
    } else {
        for (const auto& l : lines) {
            if (!l.selectivity) throw Error("query", "unlabeled queries need --relation to compute selectivities");
            if (*l.selectivity > 0.0) set.push_back({l.query, *l.selectivity, l.weight, l.origin});
        }
    }
    auto out = supervised::incremental_train_supervised(model, set, config);
    log("fine-tuned on " + std::to_string(set.size()) + " new queries");
    return out;
}

}  // namespace selest::pipeline
