#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "selest/common.hpp"
#include "selest/eval.hpp"
#include "selest/made.hpp"
#include "selest/relation.hpp"
#include "selest/supervised.hpp"

namespace selest::io {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write '" + path + "'");
    out << text;
    if (!out) throw Error("io", "write to '" + path + "' failed");
}

inline Json parse_json(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error("parse", what + ": " + e.what());
    }
}

inline std::string dump(const Json& j) { return j.dump(1) + "\n"; }

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// --- schema and relation -----------------------------------------------------

inline Json to_json(const Schema& schema) {
    Json out = Json::array();
    for (const auto& a : schema) {
        Json j{{"name", a.name}, {"kind", to_string(a.kind)}, {"domain_size", a.domain_size}, {"dictionary", a.dictionary}};
        if (a.bucketized()) {
            Json buckets = Json::array();
            for (const auto& b : a.buckets) {
                buckets.push_back({{"lo", b.lo}, {"hi", b.hi}, {"distinct", b.distinct_count}, {"rows", b.row_count}});
            }
            j["buckets"] = std::move(buckets);
        }
        out.push_back(std::move(j));
    }
    return out;
}

inline Schema schema_from_json(const Json& j) {
    Schema schema;
    for (const auto& a : j) {
        AttributeMeta m;
        m.name = a.at("name").get<std::string>();
        const auto kind = a.at("kind").get<std::string>();
        if (kind != "categorical" && kind != "numeric") throw Error("format", "unknown attribute kind '" + kind + "'");
        m.kind = kind == "numeric" ? AttributeKind::numeric : AttributeKind::categorical;
        m.domain_size = a.at("domain_size").get<std::size_t>();
        m.dictionary = a.at("dictionary").get<std::vector<std::string>>();
        if (a.contains("buckets")) {
            for (const auto& b : a.at("buckets")) {
                m.buckets.push_back({b.at("lo").get<double>(), b.at("hi").get<double>(),
                                     b.at("distinct").get<std::uint64_t>(), b.at("rows").get<std::uint64_t>()});
            }
        }
        schema.push_back(std::move(m));
    }
    return schema;
}

inline void check_header(const Json& j, const std::string& format, const std::string& path) {
    if (!j.is_object() || j.value("format", std::string()) != format) {
        throw Error("format", "'" + path + "' is not a " + format + " file");
    }
    const int version = j.at("version").get<int>();
    if (version != kFormatVersion) {
        throw Error("format", "'" + path + "' has format version " + std::to_string(version) + "; this build reads version " +
                                  std::to_string(kFormatVersion));
    }
}

inline void check_fingerprint(const Json& j, const Schema& schema, const std::string& path) {
    const auto stored = j.at("schema_fingerprint").get<std::string>();
    if (stored != hex64(schema_fingerprint(schema))) {
        throw Error("format", "'" + path + "' is corrupt: schema fingerprint does not match its schema");
    }
}

inline Json to_json(const Relation& relation) {
    if (!relation.fully_encoded()) throw Error("schema", "only fully encoded relations can be saved");
    Json j;
    j["format"] = "selest-relation";
    j["version"] = kFormatVersion;
    j["schema_fingerprint"] = hex64(schema_fingerprint(relation.schema()));
    j["schema"] = to_json(relation.schema());
    j["rows"] = relation.num_rows();
    Json codes = Json::array();
    Json raw = Json::object();
    for (std::size_t a = 0; a < relation.num_attributes(); ++a) {
        const auto col = relation.column(a);
        codes.push_back(std::vector<Code>(col.begin(), col.end()));
        const auto r = relation.raw_column(a);
        if (r.size() == relation.num_rows()) raw[relation.attribute(a).name] = std::vector<double>(r.begin(), r.end());
    }
    j["codes"] = std::move(codes);
    j["raw"] = std::move(raw);
    return j;
}

inline Relation relation_from_json(const Json& j, const std::string& path = "relation") {
    check_header(j, "selest-relation", path);
    auto schema = schema_from_json(j.at("schema"));
    check_fingerprint(j, schema, path);
    const auto rows = j.at("rows").get<std::size_t>();
    std::vector<std::vector<Code>> codes;
    std::vector<std::vector<double>> raw(schema.size());
    for (const auto& col : j.at("codes")) codes.push_back(col.get<std::vector<Code>>());
    if (codes.size() != schema.size()) throw Error("format", "'" + path + "': column count differs from schema");
    for (std::size_t a = 0; a < schema.size(); ++a) {
        if (codes[a].size() != rows) throw Error("format", "'" + path + "': column length differs from row count");
        for (Code c : codes[a]) {
            if (c >= schema[a].domain_size) throw Error("format", "'" + path + "': code outside domain");
        }
        if (j.at("raw").contains(schema[a].name)) raw[a] = j.at("raw").at(schema[a].name).get<std::vector<double>>();
    }
    return Relation(std::move(schema), std::move(codes), std::move(raw), rows);
}

inline void save_relation(const std::string& path, const Relation& relation) { write_text(path, dump(to_json(relation))); }

inline Relation load_relation(const std::string& path) {
    try {
        return relation_from_json(parse_json(read_text(path), path), path);
    } catch (const Json::exception& e) {
        throw Error("format", "'" + path + "': " + e.what());
    }
}

// --- networks ------------------------------------------------------------------

inline Json to_json(const nn::Network& net) {
    Json layers = Json::array();
    for (const auto& l : net.layers) {
        Json weights = Json::array();
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(l.weights.cols()));
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) row[static_cast<std::size_t>(c)] = l.weights(r, c);
            weights.push_back(std::move(row));
        }
        Json layer{{"activation", nn::to_string(l.activation)},
                   {"weights", std::move(weights)},
                   {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}};
        if (l.masked()) {
            std::vector<std::string> mask;
            for (Eigen::Index r = 0; r < l.mask.rows(); ++r) {
                std::string bits(static_cast<std::size_t>(l.mask.cols()), '0');
                for (Eigen::Index c = 0; c < l.mask.cols(); ++c) {
                    if (l.mask(r, c) != 0.0) bits[static_cast<std::size_t>(c)] = '1';
                }
                mask.push_back(std::move(bits));
            }
            layer["mask"] = std::move(mask);
        }
        layers.push_back(std::move(layer));
    }
    return layers;
}

inline nn::Activation activation_from_string(const std::string& s) {
    if (s == "relu") return nn::Activation::relu;
    if (s == "sigmoid") return nn::Activation::sigmoid;
    if (s == "identity") return nn::Activation::identity;
    throw Error("format", "unknown activation '" + s + "'");
}

inline nn::Network network_from_json(const Json& j) {
    nn::Network net;
    std::size_t prev_out = 0;
    for (const auto& layer : j) {
        nn::DenseLayer l;
        l.activation = activation_from_string(layer.at("activation").get<std::string>());
        const auto& w = layer.at("weights");
        const auto rows = static_cast<Eigen::Index>(w.size());
        const auto cols = rows ? static_cast<Eigen::Index>(w.at(0).size()) : 0;
        l.weights.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto row = w.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
            if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("format", "ragged weight matrix");
            for (Eigen::Index c = 0; c < cols; ++c) l.weights(r, c) = row[static_cast<std::size_t>(c)];
        }
        const auto bias = layer.at("bias").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(bias.size()) != rows) throw Error("format", "bias length differs from layer width");
        l.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), rows);
        if (layer.contains("mask")) {
            const auto mask = layer.at("mask").get<std::vector<std::string>>();
            if (static_cast<Eigen::Index>(mask.size()) != rows) throw Error("format", "mask shape differs from weights");
            l.mask = nn::Matrix::Zero(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r) {
                const auto& bits = mask[static_cast<std::size_t>(r)];
                if (static_cast<Eigen::Index>(bits.size()) != cols) throw Error("format", "mask shape differs from weights");
                for (Eigen::Index c = 0; c < cols; ++c) {
                    const char b = bits[static_cast<std::size_t>(c)];
                    if (b != '0' && b != '1') throw Error("format", "mask rows must be 0/1 strings");
                    l.mask(r, c) = b == '1' ? 1.0 : 0.0;
                }
            }
        }
        if (!net.layers.empty() && static_cast<std::size_t>(cols) != prev_out) {
            throw Error("format", "layer input width differs from previous layer output");
        }
        prev_out = static_cast<std::size_t>(rows);
        net.layers.push_back(std::move(l));
    }
    return net;
}

// --- models --------------------------------------------------------------------

inline Json to_json(const made::MadeEnsemble& ens) {
    Json j;
    j["format"] = "selest-model";
    j["version"] = kFormatVersion;
    j["kind"] = "made";
    j["schema_fingerprint"] = hex64(ens.fingerprint());
    j["schema"] = to_json(ens.schema);
    std::vector<std::size_t> sizes;
    for (const auto& s : ens.codec.slices()) sizes.push_back(s.domain_size);
    j["codec"] = {{"encoding", to_string(ens.codec.mode())}, {"domain_sizes", sizes}, {"bits", ens.codec.total_bits()}};
    const auto& c = ens.config;
    Json constraints = Json::array();
    for (const auto& [a, b] : c.constraints) constraints.push_back({a, b});
    j["training"] = {{"seed", c.seed},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"dropout", c.dropout},
                     {"ensemble_size", c.ensemble_size},
                     {"hidden", c.hidden},
                     {"constraints", std::move(constraints)},
                     {"resample_masks_per_epoch", c.resample_masks_per_epoch},
                     {"rows", ens.trained_rows}};
    Json members = Json::array();
    for (const auto& m : ens.members) {
        members.push_back({{"seed", m.seed},
                           {"attribute_order", m.ordering.attribute_order},
                           {"bit_position", m.ordering.bit_position},
                           {"hidden_degrees", m.hidden_degrees},
                           {"loss_curve", m.loss_curve},
                           {"layers", to_json(m.network)}});
    }
    j["members"] = std::move(members);
    return j;
}

inline Json to_json(const supervised::SupervisedModel& model) {
    Json j;
    j["format"] = "selest-model";
    j["version"] = kFormatVersion;
    j["kind"] = "supervised";
    j["schema_fingerprint"] = hex64(schema_fingerprint(model.schema));
    j["schema"] = to_json(model.schema);
    const auto& f = model.featurizer;
    j["featurizer"] = {{"layout", to_string(f.layout)},
                       {"domain_sizes", f.domain_sizes},
                       {"numeric", f.numeric},
                       {"value_min", f.value_min},
                       {"value_max", f.value_max}};
    j["transform"] = {{"min_abs_log", model.transform.min_abs_log}, {"max_abs_log", model.transform.max_abs_log}};
    j["floor"] = model.floor;
    const auto& c = model.config;
    j["training"] = {{"seed", c.seed},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"hidden", c.hidden},
                     {"loss", supervised::to_string(c.loss)},
                     {"qerror_form", c.qerror_form == nn::QErrorForm::max ? "max" : "sum"},
                     {"validation_fraction", c.validation_fraction},
                     {"train_curve", model.train_curve},
                     {"validation_curve", model.validation_curve}};
    j["layers"] = to_json(model.network);
    return j;
}

using Model = std::variant<made::MadeEnsemble, supervised::SupervisedModel>;

inline made::MadeEnsemble made_from_json(const Json& j) {
    made::MadeEnsemble ens;
    ens.schema = schema_from_json(j.at("schema"));
    const auto& codec = j.at("codec");
    const auto mode = codec.at("encoding").get<std::string>();
    if (mode != "binary" && mode != "onehot") throw Error("format", "unknown encoding '" + mode + "'");
    const auto sizes = codec.at("domain_sizes").get<std::vector<std::size_t>>();
    ens.codec = TupleCodec(mode == "binary" ? EncodingMode::binary : EncodingMode::onehot, sizes);
    if (!(ens.codec == TupleCodec::for_schema(ens.schema, ens.codec.mode()))) {
        throw Error("format", "codec layout does not match the schema");
    }
    const auto& t = j.at("training");
    auto& c = ens.config;
    c.seed = t.at("seed").get<std::uint64_t>();
    c.epochs = t.at("epochs").get<std::size_t>();
    c.batch_size = t.at("batch_size").get<std::size_t>();
    c.learning_rate = t.at("learning_rate").get<double>();
    c.dropout = t.at("dropout").get<double>();
    c.ensemble_size = t.at("ensemble_size").get<std::size_t>();
    c.hidden = t.at("hidden").get<std::vector<std::size_t>>();
    for (const auto& pair : t.at("constraints")) c.constraints.emplace_back(pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>());
    c.resample_masks_per_epoch = t.at("resample_masks_per_epoch").get<bool>();
    c.encoding = ens.codec.mode();
    ens.trained_rows = t.at("rows").get<std::size_t>();
    for (const auto& mj : j.at("members")) {
        made::MadeModel m;
        m.seed = mj.at("seed").get<std::uint64_t>();
        m.ordering.attribute_order = mj.at("attribute_order").get<std::vector<std::size_t>>();
        m.ordering.bit_position = mj.at("bit_position").get<std::vector<std::size_t>>();
        m.ordering.constraints = c.constraints;
        m.hidden_degrees = mj.at("hidden_degrees").get<std::vector<std::vector<std::size_t>>>();
        m.loss_curve = mj.at("loss_curve").get<std::vector<double>>();
        m.network = network_from_json(mj.at("layers"));
        if (m.network.input_size() != ens.codec.total_bits() || m.network.output_size() != ens.codec.total_bits()) {
            throw Error("format", "member network width differs from the codec");
        }
        if (m.ordering.bit_position.size() != ens.codec.total_bits()) throw Error("format", "ordering length differs from the codec");
        ens.members.push_back(std::move(m));
    }
    if (ens.members.empty()) throw Error("format", "model has no members");
    return ens;
}

inline supervised::SupervisedModel supervised_from_json(const Json& j) {
    supervised::SupervisedModel model;
    model.schema = schema_from_json(j.at("schema"));
    const auto& f = j.at("featurizer");
    const auto layout = f.at("layout").get<std::string>();
    if (layout != "point" && layout != "range") throw Error("format", "unknown featurizer layout '" + layout + "'");
    model.featurizer.layout = layout == "point" ? QueryLayout::point : QueryLayout::range;
    model.featurizer.domain_sizes = f.at("domain_sizes").get<std::vector<std::size_t>>();
    model.featurizer.numeric = f.at("numeric").get<std::vector<bool>>();
    model.featurizer.value_min = f.at("value_min").get<std::vector<double>>();
    model.featurizer.value_max = f.at("value_max").get<std::vector<double>>();
    model.transform.min_abs_log = j.at("transform").at("min_abs_log").get<double>();
    model.transform.max_abs_log = j.at("transform").at("max_abs_log").get<double>();
    model.floor = j.at("floor").get<double>();
    const auto& t = j.at("training");
    auto& c = model.config;
    c.seed = t.at("seed").get<std::uint64_t>();
    c.epochs = t.at("epochs").get<std::size_t>();
    c.batch_size = t.at("batch_size").get<std::size_t>();
    c.learning_rate = t.at("learning_rate").get<double>();
    c.hidden = t.at("hidden").get<std::vector<std::size_t>>();
    const auto loss = t.at("loss").get<std::string>();
    if (loss != "mse" && loss != "qerror") throw Error("format", "unknown loss '" + loss + "'");
    c.loss = loss == "mse" ? supervised::LossKind::mse : supervised::LossKind::qerror;
    c.qerror_form = t.at("qerror_form").get<std::string>() == "sum" ? nn::QErrorForm::sum : nn::QErrorForm::max;
    c.validation_fraction = t.at("validation_fraction").get<double>();
    model.train_curve = t.at("train_curve").get<std::vector<double>>();
    model.validation_curve = t.at("validation_curve").get<std::vector<double>>();
    model.network = network_from_json(j.at("layers"));
    if (model.network.input_size() != model.featurizer.width() || model.network.output_size() != 1) {
        throw Error("format", "network shape differs from the featurizer");
    }
    return model;
}

inline Json to_json(const Model& model) {
    return std::visit([](const auto& m) { return to_json(m); }, model);
}

inline const Schema& model_schema(const Model& model) {
    return std::visit([](const auto& m) -> const Schema& { return m.schema; }, model);
}

/// Version and fingerprint are checked before anything else is read.
inline Model model_from_json(const Json& j, const std::string& path = "model") {
    try {
        check_header(j, "selest-model", path);
        const auto schema = schema_from_json(j.at("schema"));
        check_fingerprint(j, schema, path);
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "made") return made_from_json(j);
        if (kind == "supervised") return supervised_from_json(j);
        throw Error("format", "'" + path + "': unknown model kind '" + kind + "'");
    } catch (const Json::exception& e) {
        throw Error("format", "'" + path + "': " + e.what());
    }
}

inline void save_model(const std::string& path, const Model& model) { write_text(path, dump(to_json(model))); }

inline Model load_model(const std::string& path) { return model_from_json(parse_json(read_text(path), path), path); }

/// Rejects using a model on data with a different schema.
inline void require_same_schema(const Schema& model, const Schema& data) {
    if (schema_fingerprint(model) != schema_fingerprint(data)) {
        throw Error("schema", "schema fingerprint mismatch: model " + hex64(schema_fingerprint(model)) + ", data " +
                                  hex64(schema_fingerprint(data)));
    }
}

// --- query files -----------------------------------------------------------------

struct QueryLine {
    Query query;
    std::optional<double> selectivity;
    double weight = 1.0;
    supervised::QueryOrigin origin = supervised::QueryOrigin::workload;
};

namespace detail {

inline std::size_t attribute_index(const Schema& schema, const std::string& name) {
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (schema[i].name == name) return i;
    }
    throw Error("query", "unknown attribute '" + name + "'");
}

inline supervised::QueryOrigin origin_from_string(const std::string& s) {
    if (s == "workload") return supervised::QueryOrigin::workload;
    if (s == "augmented") return supervised::QueryOrigin::augmented;
    if (s == "generated") return supervised::QueryOrigin::generated;
    throw Error("query", "unknown origin '" + s + "'");
}

}  // namespace detail

/// {"predicates": {"attr": "label" | number | [lo, hi]}, ...}. Labels and
/// numbers on categorical attributes are equality predicates; on numeric
/// attributes a label names a bucket, a number or pair is a raw-value range.
/// Any range predicate turns the whole query into a value-range query.
inline QueryLine parse_query(const Json& j, const Schema& schema) {
    if (!j.is_object() || !j.contains("predicates") || !j.at("predicates").is_object()) {
        throw Error("query", "expected an object with a 'predicates' object");
    }
    struct Item {
        std::size_t attr;
        std::optional<Code> code;
        double lo, hi;
    };
    std::vector<Item> items;
    bool any_range = false;
    for (const auto& [name, value] : j.at("predicates").items()) {
        const auto a = detail::attribute_index(schema, name);
        const auto& meta = schema[a];
        Item item{a, std::nullopt, 0.0, 0.0};
        if (value.is_string() || (value.is_number() && meta.kind == AttributeKind::categorical)) {
            const std::string label = value.is_string() ? value.get<std::string>() : format_number(value.get<double>());
            auto code = meta.lookup(label);
            if (!code) throw Error("query", "unknown value '" + label + "' for attribute '" + name + "'");
            item.code = *code;
        } else if (value.is_number()) {
            item.lo = item.hi = value.get<double>();
            any_range = true;
        } else if (value.is_array() && value.size() == 2 && value[0].is_number() && value[1].is_number()) {
            item.lo = value[0].get<double>();
            item.hi = value[1].get<double>();
            if (item.lo > item.hi) throw Error("query", "range lower bound exceeds upper bound for '" + name + "'");
            any_range = true;
        } else {
            throw Error("query", "predicate on '" + name + "' must be a label, a number or a [lo, hi] pair");
        }
        items.push_back(item);
    }
    std::sort(items.begin(), items.end(), [](const Item& x, const Item& y) { return x.attr < y.attr; });
    QueryLine line;
    if (any_range) {
        ValueRangeQuery q;
        for (const auto& it : items) {
            if (it.code) {
                const auto& meta = schema[it.attr];
                if (meta.bucketized()) {
                    q.predicates.push_back({it.attr, meta.buckets[*it.code].lo, meta.buckets[*it.code].hi});
                } else {
                    q.predicates.push_back({it.attr, static_cast<double>(*it.code), static_cast<double>(*it.code)});
                }
            } else {
                q.predicates.push_back({it.attr, it.lo, it.hi});
            }
        }
        line.query = std::move(q);
    } else {
        PointQuery q;
        for (const auto& it : items) q.predicates.push_back({it.attr, *it.code});
        line.query = std::move(q);
    }
    if (j.contains("selectivity") && !j.at("selectivity").is_null()) line.selectivity = j.at("selectivity").get<double>();
    if (j.contains("weight")) line.weight = j.at("weight").get<double>();
    if (j.contains("origin")) line.origin = detail::origin_from_string(j.at("origin").get<std::string>());
    return line;
}

inline Json query_to_json(const Query& query, const Schema& schema) {
    Json preds = Json::object();
    if (const auto* pq = std::get_if<PointQuery>(&query)) {
        for (const auto& p : pq->predicates) preds[schema.at(p.attr).name] = schema.at(p.attr).dictionary.at(p.code);
    } else {
        for (const auto& p : std::get<ValueRangeQuery>(query).predicates) {
            const auto& meta = schema.at(p.attr);
            if (meta.kind == AttributeKind::categorical && p.lo == p.hi && p.lo >= 0 && p.lo < static_cast<double>(meta.domain_size) &&
                p.lo == std::floor(p.lo)) {
                preds[meta.name] = meta.dictionary.at(static_cast<std::size_t>(p.lo));
            } else {
                preds[meta.name] = {p.lo, p.hi};
            }
        }
    }
    return Json{{"predicates", std::move(preds)}};
}

inline Json to_json(const QueryLine& line, const Schema& schema) {
    Json j = query_to_json(line.query, schema);
    if (line.selectivity) j["selectivity"] = *line.selectivity;
    j["weight"] = line.weight;
    j["origin"] = supervised::to_string(line.origin);
    return j;
}

/// One JSON object per line; blank lines are skipped. Errors cite the line.
inline std::vector<QueryLine> parse_query_lines(const std::string& text, const Schema& schema, const std::string& path = "queries") {
    std::vector<QueryLine> out;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            out.push_back(parse_query(Json::parse(line), schema));
        } catch (const Json::exception& e) {
            throw Error("parse", path + " line " + std::to_string(number) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("parse", path + " line " + std::to_string(number) + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<QueryLine> load_queries(const std::string& path, const Schema& schema) {
    return parse_query_lines(read_text(path), schema, path);
}

inline std::string format_query_lines(const std::vector<QueryLine>& lines, const Schema& schema) {
    std::string out;
    for (const auto& l : lines) out += to_json(l, schema).dump() + "\n";
    return out;
}

inline std::vector<QueryLine> to_lines(const supervised::TrainingSet& set) {
    std::vector<QueryLine> out;
    for (const auto& tq : set) out.push_back({tq.query, tq.selectivity, tq.weight, tq.origin});
    return out;
}

inline std::vector<QueryLine> to_lines(const std::vector<eval::LabeledQuery>& set) {
    std::vector<QueryLine> out;
    for (const auto& lq : set) out.push_back({lq.query, lq.selectivity, 1.0, supervised::QueryOrigin::generated});
    return out;
}

}  // namespace selest::io
