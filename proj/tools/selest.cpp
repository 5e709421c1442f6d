// selest: command-line front end for the selectivity estimation toolkit.
//
//   selest ingest --input data.csv --output rel.json
//   selest gen-workload --relation rel.json --kind test --budget 2000 --output test.jsonl
//   selest train made --relation rel.json --output made.json
//   selest evaluate --relation rel.json --queries test.jsonl --model made.json --baseline avi --output report.json
//
// Failures print one JSON line {"error": {"kind": ..., "message": ...}} on
// stderr and exit with status 1 (2 for usage errors).

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "selest/io.hpp"
#include "selest/pipeline.hpp"

namespace {

using namespace selest;

void fail_line(const std::string& kind, const std::string& message) {
    nlohmann::json j{{"error", {{"kind", kind}, {"message", message}}}};
    std::cerr << j.dump() << std::endl;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto v = parse_number(item);
        if (!v || *v < 1 || *v != std::floor(*v)) throw Error("config", "bad layer size list '" + text + "'");
        out.push_back(static_cast<std::size_t>(*v));
    }
    if (out.empty()) throw Error("config", "empty layer size list");
    return out;
}

// "name=8" (numeric with 8 buckets) or "name=categorical"
void add_hint(SchemaHints& hints, const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw Error("config", "column hint '" + text + "' must look like name=buckets or name=categorical");
    const auto name = text.substr(0, eq);
    const auto value = text.substr(eq + 1);
    if (value == "categorical") {
        hints[name].kind = AttributeKind::categorical;
    } else if (auto k = parse_number(value); k && *k >= 1 && *k == std::floor(*k)) {
        hints[name].kind = AttributeKind::numeric;
        hints[name].buckets = static_cast<std::size_t>(*k);
    } else {
        throw Error("config", "column hint '" + text + "' must look like name=buckets or name=categorical");
    }
}

std::vector<made::OrderConstraint> parse_constraints(const Schema& schema, const std::vector<std::string>& args) {
    std::vector<made::OrderConstraint> out;
    for (const auto& s : args) {
        const auto lt = s.find('<');
        if (lt == std::string::npos) throw Error("config", "order constraint '" + s + "' must look like a<b");
        auto index = [&](const std::string& name) {
            for (std::size_t i = 0; i < schema.size(); ++i) {
                if (schema[i].name == name) return i;
            }
            throw Error("config", "order constraint names unknown attribute '" + name + "'");
        };
        out.emplace_back(index(s.substr(0, lt)), index(s.substr(lt + 1)));
    }
    return out;
}

void require_distinct_output(const std::string& output, const std::vector<std::string>& inputs) {
    namespace fs = std::filesystem;
    for (const auto& in : inputs) {
        if (in.empty()) continue;
        std::error_code ec;
        if (fs::exists(output) && fs::equivalent(output, in, ec)) {
            throw Error("config", "output '" + output + "' would overwrite input '" + in + "'");
        }
    }
}

std::string stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

std::string csv_path_for(const std::string& json_path) {
    std::filesystem::path p(json_path);
    p.replace_extension(".csv");
    return p.string();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selectivity estimation with autoregressive density models and query regressors"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "TOML/INI file with option defaults; subcommand options go under [train], [evaluate], ...");
    app.allow_config_extras(CLI::config_extras_mode::error);

    std::uint64_t seed = 42;
    std::size_t threads = 1;
    std::string output;
    bool quiet = false;
    app.add_option("--seed", seed, "Random seed")->capture_default_str();
    app.add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--output,-o", output, "Output path")->required();
    app.add_flag("--quiet,-q", quiet, "Suppress progress messages");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "CSV -> encoded relation artifact");
    pipeline::IngestOptions ingest_opt;
    std::vector<std::string> hint_args;
    std::string separator = ",";
    ingest->add_option("--input", ingest_opt.input, "CSV file with a header row")->required();
    ingest->add_option("--buckets", ingest_opt.buckets, "Default equi-depth buckets for numeric columns")->capture_default_str();
    ingest->add_option("--column", hint_args, "Column hint: name=buckets or name=categorical");
    ingest->add_option("--separator", separator, "Field separator")->capture_default_str();

    // gen-workload
    auto* gen = app.add_subcommand("gen-workload", "Generate labeled training, test or augmented workloads");
    std::string gen_relation, gen_kind = "test", gen_base;
    std::size_t gen_budget = 2000;
    gen->add_option("--relation", gen_relation, "Relation artifact")->required();
    gen->add_option("--kind", gen_kind, "train | test | augment | range")->capture_default_str();
    gen->add_option("--budget", gen_budget, "Number of queries")->capture_default_str();
    gen->add_option("--workload", gen_base, "Observed workload to augment (kind=augment)");

    // train
    auto* train = app.add_subcommand("train", "Train a MADE ensemble or a supervised regressor");
    std::string train_kind, train_relation, train_workload, hidden = "100,100", encoding = "binary", loss = "qerror",
                                                              qerror_form = "max";
    std::vector<std::string> constraint_args;
    made::TrainConfig made_cfg;
    supervised::SupervisedConfig sup_cfg;
    std::size_t epochs = 100, batch = 128;
    double lr = 1e-3;
    train->add_option("kind", train_kind, "made | supervised")->required()->check(CLI::IsMember({"made", "supervised"}));
    train->add_option("--relation", train_relation, "Relation artifact")->required();
    train->add_option("--workload", train_workload, "Training queries (supervised) or weighting workload (made)");
    train->add_option("--epochs", epochs)->capture_default_str();
    train->add_option("--batch-size", batch)->capture_default_str();
    train->add_option("--learning-rate", lr)->capture_default_str();
    train->add_option("--hidden", hidden, "Hidden layer sizes")->capture_default_str();
    train->add_option("--ensemble", made_cfg.ensemble_size, "MADE ensemble size")->capture_default_str();
    train->add_option("--encoding", encoding, "binary | onehot")->capture_default_str()->check(CLI::IsMember({"binary", "onehot"}));
    train->add_option("--dropout", made_cfg.dropout, "MADE training dropout")->capture_default_str();
    train->add_option("--order", constraint_args, "MADE ordering constraint a<b");
    train->add_flag("--resample-masks", made_cfg.resample_masks_per_epoch, "Draw fresh MADE masks every epoch");
    train->add_option("--loss", loss, "qerror | mse")->capture_default_str()->check(CLI::IsMember({"qerror", "mse"}));
    train->add_option("--qerror-form", qerror_form, "max | sum")->capture_default_str()->check(CLI::IsMember({"max", "sum"}));
    train->add_option("--validation-fraction", sup_cfg.validation_fraction)->capture_default_str();

    // estimate
    auto* est = app.add_subcommand("estimate", "Estimate selectivities for a query file");
    std::string est_model, est_queries;
    made::EstimateOptions made_est;
    est->add_option("--model", est_model, "Model file")->required();
    est->add_option("--queries", est_queries, "Query file (JSON lines)")->required();
    est->add_option("--budget", made_est.budget, "Sampling budget per member")->capture_default_str();
    est->add_option("--exhaustive-limit", made_est.exhaustive_limit, "Enumerate boxes up to this many cells")->capture_default_str();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "q-error report for models and baselines");
    std::string ev_relation, ev_queries;
    std::vector<std::string> ev_models;
    pipeline::EvaluateOptions ev_opt;
    evaluate->add_option("--relation", ev_relation, "Relation artifact")->required();
    evaluate->add_option("--queries", ev_queries, "Test workload")->required();
    evaluate->add_option("--model", ev_models, "Model file (repeatable)");
    evaluate->add_option("--baseline", ev_opt.baselines, "avi | sample (repeatable)");
    evaluate->add_option("--sample-rate", ev_opt.sample_rate, "Bernoulli rate of the sample baseline")->capture_default_str();
    evaluate->add_option("--budget", ev_opt.estimate.made.budget, "Sampling budget per member")->capture_default_str();

    // incremental
    auto* inc = app.add_subcommand("incremental", "Fine-tune a model on new rows or new queries");
    std::string inc_model, inc_rows, inc_relation, inc_queries;
    made::IncrementalConfig inc_made;
    supervised::IncrementalSupervisedConfig inc_sup;
    inc->add_option("--model", inc_model, "Model file")->required();
    inc->add_option("--rows", inc_rows, "New rows as CSV (made)");
    inc->add_option("--relation", inc_relation, "New rows as a relation artifact (made), or labels for --queries");
    inc->add_option("--queries", inc_queries, "New training queries (supervised)");
    inc->add_option("--epochs", inc_made.epochs)->capture_default_str();
    inc->add_option("--lr-scale", inc_made.learning_rate_scale)->capture_default_str();
    inc->add_option("--dropout", inc_made.dropout)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        fail_line("usage", e.what());
        return 2;
    }
    pipeline::quiet() = quiet;

    try {
        if (ingest->parsed()) {
            if (separator.size() != 1) throw Error("config", "separator must be one character");
            ingest_opt.separator = separator[0];
            for (const auto& h : hint_args) add_hint(ingest_opt.hints, h);
            require_distinct_output(output, {ingest_opt.input});
            io::save_relation(output, pipeline::ingest(ingest_opt));
        } else if (gen->parsed()) {
            require_distinct_output(output, {gen_relation, gen_base});
            const auto rel = io::load_relation(gen_relation);
            const auto kind = pipeline::workload_kind(gen_kind);
            std::vector<io::QueryLine> base;
            if (kind == pipeline::WorkloadKind::augment) {
                if (gen_base.empty()) throw Error("config", "--kind augment needs --workload");
                base = io::load_queries(gen_base, rel.schema());
            }
            const auto lines = pipeline::gen_workload(rel, kind, gen_budget, seed, base);
            io::write_text(output, io::format_query_lines(lines, rel.schema()));
        } else if (train->parsed()) {
            require_distinct_output(output, {train_relation, train_workload});
            const auto rel = io::load_relation(train_relation);
            std::vector<io::QueryLine> workload;
            if (!train_workload.empty()) workload = io::load_queries(train_workload, rel.schema());
            if (train_kind == "made") {
                made_cfg.epochs = epochs;
                made_cfg.batch_size = batch;
                made_cfg.learning_rate = lr;
                made_cfg.seed = seed;
                made_cfg.threads = threads;
                made_cfg.hidden = parse_sizes(hidden);
                made_cfg.encoding = encoding == "binary" ? EncodingMode::binary : EncodingMode::onehot;
                made_cfg.constraints = parse_constraints(rel.schema(), constraint_args);
                io::save_model(output, pipeline::train_made(rel, made_cfg, workload));
            } else {
                if (workload.empty()) throw Error("config", "supervised training needs --workload");
                sup_cfg.epochs = epochs;
                sup_cfg.batch_size = batch;
                sup_cfg.learning_rate = lr;
                sup_cfg.seed = seed;
                sup_cfg.hidden = parse_sizes(hidden);
                sup_cfg.loss = loss == "mse" ? supervised::LossKind::mse : supervised::LossKind::qerror;
                sup_cfg.qerror_form = qerror_form == "sum" ? nn::QErrorForm::sum : nn::QErrorForm::max;
                io::save_model(output, pipeline::train_supervised(rel, workload, sup_cfg));
            }
        } else if (est->parsed()) {
            require_distinct_output(output, {est_model, est_queries});
            const auto model = io::load_model(est_model);
            const auto& schema = io::model_schema(model);
            auto lines = io::load_queries(est_queries, schema);
            std::vector<Query> queries;
            for (const auto& l : lines) queries.push_back(l.query);
            const auto values = pipeline::estimate(model, queries, {made_est, seed, threads});
            std::string out;
            for (std::size_t i = 0; i < lines.size(); ++i) {
                auto j = io::to_json(lines[i], schema);
                j["estimate"] = values[i];
                out += j.dump() + "\n";
            }
            io::write_text(output, out);
        } else if (evaluate->parsed()) {
            auto inputs = ev_models;
            inputs.push_back(ev_relation);
            inputs.push_back(ev_queries);
            require_distinct_output(output, inputs);
            if (ev_models.empty() && ev_opt.baselines.empty()) throw Error("config", "nothing to evaluate: give --model or --baseline");
            const auto rel = io::load_relation(ev_relation);
            const auto queries = pipeline::labeled_points(rel, io::load_queries(ev_queries, rel.schema()));
            std::vector<pipeline::NamedModel> models;
            for (const auto& path : ev_models) models.push_back({stem(path), io::load_model(path)});
            ev_opt.estimate.seed = seed;
            ev_opt.estimate.threads = threads;
            const auto reports = pipeline::evaluate(rel, queries, models, ev_opt);
            io::write_text(output, io::dump(pipeline::reports_json(reports)));
            io::write_text(csv_path_for(output), pipeline::reports_csv(reports));
        } else if (inc->parsed()) {
            require_distinct_output(output, {inc_model, inc_rows, inc_relation, inc_queries});
            auto model = io::load_model(inc_model);
            inc_made.seed = seed;
            inc_made.threads = threads;
            if (auto* ens = std::get_if<made::MadeEnsemble>(&model)) {
                Relation rows;
                if (!inc_rows.empty()) rows = encode_with_schema(csv::read_file(inc_rows), ens->schema);
                else if (!inc_relation.empty()) rows = io::load_relation(inc_relation);
                else throw Error("config", "MADE fine-tuning needs --rows or --relation");
                io::save_model(output, pipeline::incremental_made(*ens, rows, inc_made));
            } else {
                auto& sup = std::get<supervised::SupervisedModel>(model);
                if (inc_queries.empty()) throw Error("config", "supervised fine-tuning needs --queries");
                inc_sup.epochs = inc_made.epochs;
                inc_sup.learning_rate_scale = inc_made.learning_rate_scale;
                inc_sup.dropout = inc_made.dropout;
                inc_sup.seed = seed;
                const auto lines = io::load_queries(inc_queries, sup.schema);
                std::optional<Relation> rel;
                if (!inc_relation.empty()) rel = io::load_relation(inc_relation);
                io::save_model(output, pipeline::incremental_supervised(sup, lines, rel ? &*rel : nullptr, inc_sup));
            }
        }
    } catch (const Error& e) {
        fail_line(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        fail_line("internal", e.what());
        return 1;
    }
    return 0;
}
