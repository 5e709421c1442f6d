#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <variant>
#include <vector>

#include "selest/common.hpp"
#include "selest/encoding.hpp"
#include "selest/neural.hpp"
#include "selest/relation.hpp"
#include "selest/transform.hpp"

namespace selest {

/// A supervised query: equality predicates, or inclusive ranges over raw values.
using Query = std::variant<PointQuery, ValueRangeQuery>;

inline double true_selectivity(const Relation& relation, const Query& q) {
    return std::visit([&](const auto& v) { return true_selectivity(relation, v); }, q);
}

inline std::size_t predicate_count(const Query& q) {
    return std::visit([](const auto& v) { return v.predicates.size(); }, q);
}

inline std::vector<std::size_t> query_attributes(const Query& q) {
    return std::visit(
        [](const auto& v) {
            std::vector<std::size_t> attrs;
            for (const auto& p : v.predicates) attrs.push_back(p.attr);
            std::sort(attrs.begin(), attrs.end());
            return attrs;
        },
        q);
}

}  // namespace selest

namespace selest::supervised {

enum class QueryOrigin { workload, augmented, generated };

inline const char* to_string(QueryOrigin o) {
    switch (o) {
        case QueryOrigin::workload: return "workload";
        case QueryOrigin::augmented: return "augmented";
        case QueryOrigin::generated: return "generated";
    }
    return "generated";
}

struct TrainingQuery {
    Query query;
    double selectivity = 0.0;
    double weight = 1.0;
    QueryOrigin origin = QueryOrigin::generated;
};

using TrainingSet = std::vector<TrainingQuery>;

enum class LossKind { mse, qerror };

inline const char* to_string(LossKind k) { return k == LossKind::mse ? "mse" : "qerror"; }

struct SupervisedConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    std::uint64_t seed = 42;
    std::vector<std::size_t> hidden = {100, 100};
    LossKind loss = LossKind::qerror;
    nn::QErrorForm qerror_form = nn::QErrorForm::max;
    double validation_fraction = 0.1;
};

struct IncrementalSupervisedConfig {
    std::size_t epochs = 20;
    double learning_rate_scale = 0.1;
    double dropout = 0.1;
    std::uint64_t seed = 7;
};

/// Query -> selectivity regressor with the transform needed to invert its output.
struct SupervisedModel {
    /// Lets model files resolve attribute names; not used by estimation itself.
    Schema schema;
    QueryFeaturizer featurizer;
    nn::Network network;
    SelTransform transform;
    double floor = 1e-7;  ///< selectivity clamp 1 / (10 n)
    SupervisedConfig config;
    std::vector<double> train_curve;
    std::vector<double> validation_curve;
};

/// Random conjunction of `k` distinct attributes with values copied from a
/// uniformly drawn row; queries are therefore drawn proportionally to their
/// selectivity. Predicates are sorted by attribute.
inline PointQuery sample_query_from_row(const Relation& relation, std::size_t k, Rng& rng) {
    const std::size_t m = relation.num_attributes();
    if (k < 1 || k > m) throw Error("domain", "predicate count out of range");
    std::vector<std::size_t> attrs(m);
    std::iota(attrs.begin(), attrs.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, m - 1);
        std::swap(attrs[i], attrs[pick(rng)]);
    }
    attrs.resize(k);
    std::sort(attrs.begin(), attrs.end());
    std::uniform_int_distribution<std::size_t> row_pick(0, relation.num_rows() - 1);
    const std::size_t row = row_pick(rng);
    PointQuery q;
    for (auto a : attrs) q.predicates.push_back({a, relation.code(row, a)});
    return q;
}

/// Every non-empty 1-predicate query, then random multi-predicate queries
/// (k uniform in 2..m) until the budget is filled, de-duplicated. Stops early
/// if the distinct query space is exhausted.
inline TrainingSet generate_training_set(const Relation& relation, std::size_t budget, Rng& rng) {
    TrainingSet out;
    std::set<PointQuery> seen;
    const std::size_t m = relation.num_attributes();
    for (std::size_t a = 0; a < m; ++a) {
        std::vector<std::size_t> counts(relation.attribute(a).domain_size, 0);
        for (Code c : relation.column(a)) ++counts[c];
        for (std::size_t c = 0; c < counts.size(); ++c) {
            if (counts[c] == 0) continue;
            PointQuery q{{{a, static_cast<Code>(c)}}};
            seen.insert(q);
            out.push_back({q, static_cast<double>(counts[c]) / static_cast<double>(relation.num_rows()), 1.0,
                           QueryOrigin::generated});
        }
    }
    if (budget < out.size()) {
        throw Error("budget", "training budget " + std::to_string(budget) + " is below the " +
                                  std::to_string(out.size()) + " single-predicate queries; need at least " +
                                  std::to_string(out.size()));
    }
    if (m < 2) return out;
    std::uniform_int_distribution<std::size_t> pick_k(2, m);
    const std::size_t max_attempts = 50 * budget + 1000;
    for (std::size_t attempt = 0; out.size() < budget && attempt < max_attempts; ++attempt) {
        auto q = sample_query_from_row(relation, pick_k(rng), rng);
        if (!seen.insert(q).second) continue;
        out.push_back({q, true_selectivity(relation, q), 1.0, QueryOrigin::generated});
    }
    return out;
}

/// Sampling weights measured from a workload. Attributes, values and
/// predicate counts that never occur get a token frequency of one.
struct WorkloadProfile {
    std::vector<double> attribute_weights;
    std::vector<std::vector<double>> value_weights;
    /// predicate_count_weights[k] for k = 0..m (index 0 is always zero)
    std::vector<double> predicate_count_weights;
};

inline WorkloadProfile profile_workload(const Schema& schema, const std::vector<PointQuery>& workload) {
    const std::size_t m = schema.size();
    WorkloadProfile p;
    std::vector<double> attr_counts(m, 0.0);
    std::vector<std::vector<double>> value_counts(m);
    for (std::size_t a = 0; a < m; ++a) value_counts[a].assign(schema[a].domain_size, 0.0);
    std::vector<double> k_counts(m + 1, 0.0);
    for (const auto& q : workload) {
        validate(schema, q);
        k_counts[q.predicates.size()] += 1.0;
        for (const auto& pr : q.predicates) {
            attr_counts[pr.attr] += 1.0;
            value_counts[pr.attr][pr.code] += 1.0;
        }
    }
    auto normalize = [](std::vector<double> counts, bool token) {
        double total = 0.0;
        for (auto& c : counts) {
            if (token && c == 0.0) c = 1.0;
            total += c;
        }
        if (total > 0.0) {
            for (auto& c : counts) c /= total;
        }
        return counts;
    };
    p.attribute_weights = normalize(attr_counts, true);
    for (auto& v : value_counts) p.value_weights.push_back(normalize(v, true));
    p.predicate_count_weights = normalize(k_counts, false);
    return p;
}

namespace detail {

inline std::size_t weighted_pick(const std::vector<double>& w, Rng& rng) {
    double total = 0.0;
    for (double x : w) total += x;
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng);
    std::size_t last = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] <= 0.0) continue;
        last = i;
        if (r < w[i]) return i;
        r -= w[i];
    }
    return last;
}

}  // namespace detail

/// Workload query drawn from the profile's induced distributions.
inline PointQuery sample_from_profile(const WorkloadProfile& profile, Rng& rng) {
    const std::size_t k = detail::weighted_pick(profile.predicate_count_weights, rng);
    std::vector<double> attr_w = profile.attribute_weights;
    std::vector<std::size_t> attrs;
    for (std::size_t i = 0; i < k; ++i) {
        const auto a = detail::weighted_pick(attr_w, rng);
        attrs.push_back(a);
        attr_w[a] = 0.0;
    }
    std::sort(attrs.begin(), attrs.end());
    PointQuery q;
    for (auto a : attrs) q.predicates.push_back({a, static_cast<Code>(detail::weighted_pick(profile.value_weights[a], rng))});
    return q;
}

/// Q plus distinct augmented queries Q' sampled from the workload's induced
/// distributions, |Q u Q'| = budget. Weights: 1 for Q, |Q|/|Q'| for Q'.
/// Zero-selectivity queries cannot be trained on and are skipped.
inline TrainingSet augment_workload(const Relation& relation, const std::vector<PointQuery>& workload,
                                    std::size_t budget, Rng& rng) {
    if (workload.empty()) throw Error("domain", "workload augmentation needs a non-empty workload");
    if (budget < workload.size()) {
        throw Error("budget", "augmentation budget " + std::to_string(budget) + " is smaller than the workload (" +
                                  std::to_string(workload.size()) + " queries)");
    }
    const auto profile = profile_workload(relation.schema(), workload);
    std::set<PointQuery> seen;
    TrainingSet out;
    for (const auto& q : workload) {
        PointQuery canon = q;
        std::sort(canon.predicates.begin(), canon.predicates.end());
        if (!seen.insert(canon).second) continue;
        const double s = true_selectivity(relation, canon);
        if (s > 0.0) out.push_back({canon, s, 1.0, QueryOrigin::workload});
    }
    const std::size_t base = out.size();
    const std::size_t wanted = budget - workload.size();
    const std::size_t max_attempts = 200 * wanted + 1000;
    for (std::size_t attempt = 0; out.size() - base < wanted && attempt < max_attempts; ++attempt) {
        auto q = sample_from_profile(profile, rng);
        if (q.predicates.empty() || !seen.insert(q).second) continue;
        const double s = true_selectivity(relation, q);
        if (s > 0.0) out.push_back({q, s, 1.0, QueryOrigin::augmented});
    }
    const std::size_t augmented = out.size() - base;
    if (augmented > 0) {
        const double w = static_cast<double>(workload.size()) / static_cast<double>(augmented);
        for (std::size_t i = base; i < out.size(); ++i) out[i].weight = w;
    }
    return out;
}

/// Range training queries over bucketized numeric attributes. Single-predicate
/// ranges span whole buckets [lo_i, hi_j]; two-predicate queries come from the
/// cartesian product of two attributes' single ranges; larger ones pick a
/// random interval per chosen attribute. Empty queries are dropped.
inline TrainingSet generate_range_training_set(const Relation& relation, std::size_t budget, Rng& rng) {
    std::vector<std::size_t> numeric;
    std::vector<std::vector<ValuePredicate>> singles;
    for (std::size_t a = 0; a < relation.num_attributes(); ++a) {
        const auto& meta = relation.attribute(a);
        if (!meta.bucketized()) continue;
        numeric.push_back(a);
        std::vector<ValuePredicate> ranges;
        for (std::size_t i = 0; i < meta.buckets.size(); ++i) {
            for (std::size_t j = i; j < meta.buckets.size(); ++j) {
                ranges.push_back({a, meta.buckets[i].lo, meta.buckets[j].hi});
            }
        }
        singles.push_back(std::move(ranges));
    }
    if (numeric.empty()) throw Error("schema", "range training needs at least one bucketized numeric attribute");

    TrainingSet out;
    std::set<std::vector<std::tuple<std::size_t, double, double>>> seen;
    auto add = [&](ValueRangeQuery q) {
        std::vector<std::tuple<std::size_t, double, double>> key;
        for (const auto& p : q.predicates) key.emplace_back(p.attr, p.lo, p.hi);
        if (!seen.insert(key).second) return;
        const double s = true_selectivity(relation, q);
        if (s > 0.0) out.push_back({std::move(q), s, 1.0, QueryOrigin::generated});
    };
    for (const auto& ranges : singles) {
        for (const auto& r : ranges) {
            if (out.size() >= budget) return out;
            add(ValueRangeQuery{{r}});
        }
    }
    std::vector<ValueRangeQuery> pairs;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
        for (std::size_t j = i + 1; j < numeric.size(); ++j) {
            for (const auto& a : singles[i]) {
                for (const auto& b : singles[j]) pairs.push_back(ValueRangeQuery{{a, b}});
            }
        }
    }
    std::shuffle(pairs.begin(), pairs.end(), rng);
    for (auto& q : pairs) {
        if (out.size() >= budget) return out;
        add(std::move(q));
    }
    if (numeric.size() < 3) return out;
    std::uniform_int_distribution<std::size_t> pick_k(3, numeric.size());
    const std::size_t max_attempts = 50 * budget + 1000;
    for (std::size_t attempt = 0; out.size() < budget && attempt < max_attempts; ++attempt) {
        std::vector<std::size_t> idx(numeric.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(pick_k(rng));
        std::sort(idx.begin(), idx.end());
        ValueRangeQuery q;
        for (auto i : idx) {
            std::uniform_int_distribution<std::size_t> pick(0, singles[i].size() - 1);
            q.predicates.push_back(singles[i][pick(rng)]);
        }
        add(std::move(q));
    }
    return out;
}

/// Recomputes labels against an updated relation; queries that became empty
/// are dropped and counted.
struct RefreshResult {
    TrainingSet queries;
    std::size_t dropped = 0;
};

inline RefreshResult refresh_selectivities(const TrainingSet& set, const Relation& relation) {
    RefreshResult r;
    for (const auto& tq : set) {
        double s = 0.0;
        try {
            s = true_selectivity(relation, tq.query);
        } catch (const Error& e) {
            throw Error("schema", std::string("schema drift: ") + e.what());
        }
        if (s > 0.0) {
            auto copy = tq;
            copy.selectivity = s;
            r.queries.push_back(std::move(copy));
        } else {
            ++r.dropped;
        }
    }
    return r;
}

inline std::vector<double> featurize(const QueryFeaturizer& f, const Query& q) {
    return std::visit([&](const auto& v) { return f.featurize(v); }, q);
}

inline nn::Matrix feature_matrix(const QueryFeaturizer& f, std::span<const Query> queries) {
    nn::Matrix x(static_cast<Eigen::Index>(f.width()), static_cast<Eigen::Index>(queries.size()));
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto v = featurize(f, queries[i]);
        x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    return x;
}

namespace detail {

struct EpochSetup {
    std::size_t epochs;
    std::size_t batch_size;
    double learning_rate;
    double dropout;
};

inline double batch_loss(const SupervisedModel& model, const nn::Matrix& out, std::span<const double> truth,
                         std::span<const double> scaled, std::span<const double> weights, nn::Matrix* grad) {
    nn::LossResult loss;
    if (model.config.loss == LossKind::mse) {
        nn::Matrix target(1, static_cast<Eigen::Index>(scaled.size()));
        for (std::size_t i = 0; i < scaled.size(); ++i) target(0, static_cast<Eigen::Index>(i)) = scaled[i];
        loss = nn::mse_loss(out, target, weights);
    } else {
        loss = nn::qerror_loss(out, truth, model.transform, model.floor, weights, model.config.qerror_form);
    }
    if (grad) *grad = std::move(loss.grad);
    return loss.value;
}

inline void fit(SupervisedModel& model, const nn::Matrix& x, const std::vector<double>& truth,
                const std::vector<double>& scaled, const std::vector<double>& weights, const nn::Matrix& val_x,
                const std::vector<double>& val_truth, const std::vector<double>& val_scaled, const EpochSetup& setup,
                Rng& rng) {
    const auto n = static_cast<std::size_t>(x.cols());
    if (n == 0 || setup.epochs == 0) return;
    auto adam = nn::AdamState::for_network(model.network, {setup.learning_rate, 0.9, 0.999, 1e-8});
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const nn::DropoutSpec dropout{setup.dropout, false};
    std::vector<double> bt, bs, bw;
    for (std::size_t epoch = 0; epoch < setup.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += setup.batch_size) {
            const std::size_t end = std::min(n, start + setup.batch_size);
            const auto b = static_cast<Eigen::Index>(end - start);
            nn::Matrix xb(x.rows(), b);
            bt.clear();
            bs.clear();
            bw.clear();
            for (std::size_t i = start; i < end; ++i) {
                xb.col(static_cast<Eigen::Index>(i - start)) = x.col(static_cast<Eigen::Index>(order[i]));
                bt.push_back(truth[order[i]]);
                bs.push_back(scaled[order[i]]);
                bw.push_back(weights[order[i]]);
            }
            const auto cache = nn::forward(model.network, xb, setup.dropout > 0.0 ? &dropout : nullptr, &rng);
            nn::Matrix grad;
            total += batch_loss(model, cache.output(), bt, bs, bw, &grad);
            auto grads = nn::backward(model.network, cache, grad);
            nn::scale(grads, 1.0 / static_cast<double>(b));
            nn::adam_step(model.network, grads, adam);
        }
        model.train_curve.push_back(total / static_cast<double>(n));
        if (val_x.cols() > 0) {
            const nn::Matrix out = nn::predict(model.network, val_x);
            const double v = batch_loss(model, out, val_truth, val_scaled, {}, nullptr);
            model.validation_curve.push_back(v / static_cast<double>(val_x.cols()));
        }
    }
}

}  // namespace detail

/// Trains the two-hidden-layer ReLU regressor with a sigmoid output by
/// minibatch Adam on weighted MSE (of transformed targets) or q-error.
/// A validation share is held out for curve reporting only.
inline SupervisedModel train_supervised(const TrainingSet& set, const QueryFeaturizer& featurizer,
                                        std::size_t relation_rows, const SupervisedConfig& config = {}) {
    if (set.size() < 2) throw Error("domain", "supervised training needs at least two queries");
    if (relation_rows == 0) throw Error("domain", "relation row count must be positive");
    std::vector<double> sels;
    for (const auto& tq : set) {
        if (!(tq.selectivity > 0.0)) throw Error("domain", "training queries must have positive selectivity");
        if (tq.weight < 0.0) throw Error("domain", "negative query weight");
        sels.push_back(tq.selectivity);
    }
    SupervisedModel model;
    model.featurizer = featurizer;
    model.config = config;
    model.floor = selectivity_floor(relation_rows);
    model.transform = fit_transform(sels).transform;

    Rng rng = make_rng(config.seed, 0);
    std::vector<std::size_t> sizes{featurizer.width()};
    std::vector<nn::Activation> acts;
    for (auto h : config.hidden) {
        sizes.push_back(h);
        acts.push_back(nn::Activation::relu);
    }
    sizes.push_back(1);
    acts.push_back(nn::Activation::sigmoid);
    model.network = nn::Network::dense(sizes, acts, rng);

    std::vector<std::size_t> idx(set.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng split_rng = make_rng(config.seed, 1);
    std::shuffle(idx.begin(), idx.end(), split_rng);
    const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(set.size())));
    const std::size_t n_train = set.size() - n_val;

    auto gather = [&](std::size_t from, std::size_t to, nn::Matrix& x, std::vector<double>& truth,
                      std::vector<double>& scaled, std::vector<double>* weights) {
        std::vector<Query> qs;
        for (std::size_t i = from; i < to; ++i) {
            const auto& tq = set[idx[i]];
            qs.push_back(tq.query);
            truth.push_back(tq.selectivity);
            scaled.push_back(model.transform.forward(tq.selectivity));
            if (weights) weights->push_back(tq.weight);
        }
        x = feature_matrix(featurizer, qs);
    };
    nn::Matrix x, vx;
    std::vector<double> truth, scaled, weights, vtruth, vscaled;
    gather(0, n_train, x, truth, scaled, &weights);
    gather(n_train, set.size(), vx, vtruth, vscaled, nullptr);

    Rng fit_rng = make_rng(config.seed, 2);
    detail::fit(model, x, truth, scaled, weights, vx, vtruth, vscaled,
                {config.epochs, config.batch_size, config.learning_rate, 0.0}, fit_rng);
    return model;
}

inline std::vector<double> estimate_batch(const SupervisedModel& model, std::span<const Query> queries) {
    const nn::Matrix out = nn::predict(model.network, feature_matrix(model.featurizer, queries));
    std::vector<double> est(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        est[i] = std::clamp(model.transform.inverse(out(0, static_cast<Eigen::Index>(i))), model.floor, 1.0);
    }
    return est;
}

/// featurize -> forward -> inverse transform, clamped to [floor, 1].
inline double estimate(const SupervisedModel& model, const Query& q) {
    return estimate_batch(model, std::span<const Query>(&q, 1))[0];
}

/// Fine-tunes on new queries only, from the current weights, with the existing
/// transform (abs-logs outside its range are clamped to the boundary).
inline SupervisedModel incremental_train_supervised(const SupervisedModel& model, const TrainingSet& new_queries,
                                                    const IncrementalSupervisedConfig& config = {},
                                                    const QueryFeaturizer* current_featurizer = nullptr) {
    if (current_featurizer && !(*current_featurizer == model.featurizer)) {
        throw Error("schema", "featurizer mismatch: the model was trained on a different query layout");
    }
    SupervisedModel out = model;
    if (new_queries.empty() || config.epochs == 0) return out;
    std::vector<Query> qs;
    std::vector<double> truth, scaled, weights;
    for (const auto& tq : new_queries) {
        if (!(tq.selectivity > 0.0)) throw Error("domain", "training queries must have positive selectivity");
        qs.push_back(tq.query);
        truth.push_back(tq.selectivity);
        scaled.push_back(model.transform.forward_clamped(tq.selectivity));
        weights.push_back(tq.weight);
    }
    const nn::Matrix x = feature_matrix(model.featurizer, qs);
    Rng rng = make_rng(config.seed, 3);
    detail::fit(out, x, truth, scaled, weights, nn::Matrix(x.rows(), 0), {}, {},
                {config.epochs, model.config.batch_size, model.config.learning_rate * config.learning_rate_scale,
                 config.dropout},
                rng);
    return out;
}

}  // namespace selest::supervised
