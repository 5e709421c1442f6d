#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "selest/common.hpp"
#include "selest/encoding.hpp"
#include "selest/neural.hpp"
#include "selest/range.hpp"
#include "selest/relation.hpp"

namespace selest::made {

using nn::Matrix;

/// (before, after): every bit of `before` precedes every bit of `after`.
using OrderConstraint = std::pair<std::size_t, std::size_t>;

/// Attribute order of one autoregressive factorization, flattened to bits.
struct Ordering {
    /// attribute_order[k] is the attribute placed k-th in the chain.
    std::vector<std::size_t> attribute_order;
    /// m0: bit_position[d] is the chain position of input bit d.
    std::vector<std::size_t> bit_position;
    std::vector<OrderConstraint> constraints;

    /// Chain position of each attribute.
    std::vector<std::size_t> attribute_rank() const {
        std::vector<std::size_t> rank(attribute_order.size());
        for (std::size_t k = 0; k < attribute_order.size(); ++k) rank[attribute_order[k]] = k;
        return rank;
    }

    bool operator==(const Ordering&) const = default;
};

/// Bits of one attribute stay contiguous and in codec order.
inline Ordering ordering_from_attributes(const TupleCodec& codec, std::vector<std::size_t> attribute_order,
                                         std::vector<OrderConstraint> constraints = {}) {
    if (attribute_order.size() != codec.num_attributes()) throw Error("ordering", "ordering must cover every attribute");
    std::vector<bool> seen(attribute_order.size(), false);
    for (auto a : attribute_order) {
        if (a >= seen.size() || seen[a]) throw Error("ordering", "attribute order is not a permutation");
        seen[a] = true;
    }
    Ordering o;
    o.bit_position.assign(codec.total_bits(), 0);
    std::size_t pos = 0;
    for (auto a : attribute_order) {
        const auto& s = codec.slice(a);
        for (std::size_t b = 0; b < s.width; ++b) o.bit_position[s.offset + b] = pos++;
    }
    o.attribute_order = std::move(attribute_order);
    o.constraints = std::move(constraints);
    auto rank = o.attribute_rank();
    for (const auto& [before, after] : o.constraints) {
        if (rank.at(before) >= rank.at(after)) throw Error("ordering", "attribute order violates a constraint");
    }
    return o;
}

namespace detail {

/// Predecessor bitmask per attribute; throws on cycles.
inline std::vector<std::uint64_t> constraint_masks(std::size_t m, const std::vector<OrderConstraint>& constraints) {
    std::vector<std::vector<std::size_t>> succ(m);
    std::vector<std::size_t> indegree(m, 0);
    std::vector<std::uint64_t> preds(m, 0);
    for (const auto& [before, after] : constraints) {
        if (before >= m || after >= m) throw Error("ordering", "constraint references an unknown attribute");
        if (before == after) throw Error("ordering", "cyclic ordering constraints");
        succ[before].push_back(after);
        ++indegree[after];
        if (m <= 64) preds[after] |= std::uint64_t{1} << before;
    }
    std::vector<std::size_t> ready;
    for (std::size_t a = 0; a < m; ++a) {
        if (indegree[a] == 0) ready.push_back(a);
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
        auto a = ready.back();
        ready.pop_back();
        ++visited;
        for (auto s : succ[a]) {
            if (--indegree[s] == 0) ready.push_back(s);
        }
    }
    if (visited != m) throw Error("ordering", "cyclic ordering constraints");
    return preds;
}

}  // namespace detail

/// Uniformly random attribute permutation among those consistent with the
/// constraints. Exact for up to 20 constrained attributes (linear-extension
/// counting over subsets); beyond that a randomized topological sort is used.
inline Ordering sample_ordering(Rng& rng, const TupleCodec& codec, const std::vector<OrderConstraint>& constraints = {}) {
    const std::size_t m = codec.num_attributes();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    const auto preds = detail::constraint_masks(m, constraints);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    if (constraints.empty()) {
        std::shuffle(order.begin(), order.end(), rng);
    } else if (m <= 20) {
        // ways[S] = number of ways to finish once the attributes in S are placed
        const std::size_t full = (std::size_t{1} << m) - 1;
        std::vector<double> ways(full + 1, 0.0);
        ways[full] = 1.0;
        for (std::size_t s = full; s-- > 0;) {
            double w = 0.0;
            for (std::size_t a = 0; a < m; ++a) {
                if (!(s >> a & 1U) && (preds[a] & ~static_cast<std::uint64_t>(s)) == 0) w += ways[s | (std::size_t{1} << a)];
            }
            ways[s] = w;
        }
        std::size_t placed = 0;
        for (std::size_t k = 0; k < m; ++k) {
            double x = u(rng) * ways[placed];
            std::size_t chosen = m;
            for (std::size_t a = 0; a < m; ++a) {
                if ((placed >> a & 1U) || (preds[a] & ~static_cast<std::uint64_t>(placed)) != 0) continue;
                chosen = a;
                const double w = ways[placed | (std::size_t{1} << a)];
                if (x < w) break;
                x -= w;
            }
            order[k] = chosen;
            placed |= std::size_t{1} << chosen;
        }
    } else {
        // FIXME: not uniform over linear extensions for more than 20 attributes.
        std::vector<std::vector<std::size_t>> succ(m);
        std::vector<std::size_t> indegree(m, 0);
        for (const auto& [before, after] : constraints) {
            succ[before].push_back(after);
            ++indegree[after];
        }
        std::vector<std::size_t> ready;
        for (std::size_t a = 0; a < m; ++a) {
            if (indegree[a] == 0) ready.push_back(a);
        }
        for (std::size_t k = 0; k < m; ++k) {
            std::uniform_int_distribution<std::size_t> pick(0, ready.size() - 1);
            const auto i = pick(rng);
            order[k] = ready[i];
            ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(i));
            for (auto s : succ[order[k]]) {
                if (--indegree[s] == 0) ready.push_back(s);
            }
        }
    }
    return ordering_from_attributes(codec, std::move(order), constraints);
}

/// Connectivity masks of a masked autoencoder plus the degrees they came from.
struct MadeMasks {
    std::vector<std::vector<std::size_t>> hidden_degrees;
    std::vector<Matrix> masks;  // hidden layers first, output last
};

/// Hidden mask: unit k of layer l sees unit k' of layer l-1 iff m_l(k) >= m_{l-1}(k').
/// Output mask: bit d sees hidden unit k iff m0(d) > m_L(k).
inline MadeMasks masks_from_degrees(std::span<const std::size_t> input_degrees,
                                    std::vector<std::vector<std::size_t>> hidden_degrees) {
    MadeMasks out;
    std::vector<std::size_t> prev(input_degrees.begin(), input_degrees.end());
    for (const auto& degrees : hidden_degrees) {
        Matrix mask(static_cast<Eigen::Index>(degrees.size()), static_cast<Eigen::Index>(prev.size()));
        for (std::size_t k = 0; k < degrees.size(); ++k) {
            for (std::size_t j = 0; j < prev.size(); ++j) {
                mask(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = degrees[k] >= prev[j] ? 1.0 : 0.0;
            }
        }
        out.masks.push_back(std::move(mask));
        prev = degrees;
    }
    Matrix output(static_cast<Eigen::Index>(input_degrees.size()), static_cast<Eigen::Index>(prev.size()));
    for (std::size_t d = 0; d < input_degrees.size(); ++d) {
        for (std::size_t k = 0; k < prev.size(); ++k) {
            output(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) = input_degrees[d] > prev[k] ? 1.0 : 0.0;
        }
    }
    out.masks.push_back(std::move(output));
    out.hidden_degrees = std::move(hidden_degrees);
    return out;
}

/// Draws each hidden degree uniformly from [min degree of the previous layer, D-2].
inline MadeMasks build_masks(std::span<const std::size_t> hidden_sizes, const Ordering& ordering, Rng& rng) {
    if (hidden_sizes.empty()) throw Error("shape", "a masked autoencoder needs at least one hidden layer");
    const std::size_t bits = ordering.bit_position.size();
    if (bits == 0) throw Error("shape", "empty ordering");
    const std::size_t top = bits >= 2 ? bits - 2 : 0;
    std::vector<std::vector<std::size_t>> degrees;
    std::size_t lower = *std::min_element(ordering.bit_position.begin(), ordering.bit_position.end());
    for (auto size : hidden_sizes) {
        std::uniform_int_distribution<std::size_t> d(lower, std::max(lower, top));
        std::vector<std::size_t> layer(size);
        for (auto& v : layer) v = d(rng);
        lower = size ? *std::min_element(layer.begin(), layer.end()) : lower;
        degrees.push_back(std::move(layer));
    }
    return masks_from_degrees(ordering.bit_position, std::move(degrees));
}

/// One masked autoregressive density network with its ordering.
struct MadeModel {
    Ordering ordering;
    std::vector<std::vector<std::size_t>> hidden_degrees;
    nn::Network network;
    std::uint64_t seed = 0;
    std::vector<double> loss_curve;

    /// Fresh model: masks from `ordering`, hidden weights from the scaled uniform init.
    static MadeModel create(const TupleCodec& codec, Ordering ordering, std::span<const std::size_t> hidden_sizes,
                            Rng& rng) {
        MadeModel m;
        auto masks = build_masks(hidden_sizes, ordering, rng);
        std::vector<std::size_t> sizes{codec.total_bits()};
        std::vector<nn::Activation> acts;
        for (auto h : hidden_sizes) {
            sizes.push_back(h);
            acts.push_back(nn::Activation::relu);
        }
        sizes.push_back(codec.total_bits());
        acts.push_back(nn::Activation::sigmoid);
        m.network = nn::Network::dense(sizes, acts, rng);
        // zero output layer: an untrained model is the uniform 0.5^D distribution
        m.network.layers.back().weights.setZero();
        for (std::size_t l = 0; l < masks.masks.size(); ++l) m.network.layers[l].mask = std::move(masks.masks[l]);
        m.hidden_degrees = std::move(masks.hidden_degrees);
        m.ordering = std::move(ordering);
        return m;
    }

    void set_degrees(std::vector<std::vector<std::size_t>> degrees) {
        auto masks = masks_from_degrees(ordering.bit_position, std::move(degrees));
        for (std::size_t l = 0; l < masks.masks.size(); ++l) network.layers[l].mask = std::move(masks.masks[l]);
        hidden_degrees = std::move(masks.hidden_degrees);
    }
};

/// log p(x) per column of a D x batch bit matrix, from one forward pass.
inline std::vector<double> bits_logprob(const MadeModel& model, const Matrix& bits) {
    const Matrix probs = nn::predict(model.network, bits);
    std::vector<double> out(static_cast<std::size_t>(bits.cols()), 0.0);
    for (Eigen::Index c = 0; c < bits.cols(); ++c) {
        double lp = 0.0;
        for (Eigen::Index i = 0; i < bits.rows(); ++i) {
            const double p = std::clamp(probs(i, c), kProbEpsilon, 1.0 - kProbEpsilon);
            lp += bits(i, c) != 0.0 ? std::log(p) : std::log(1.0 - p);
        }
        out[static_cast<std::size_t>(c)] = lp;
    }
    return out;
}

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    std::uint64_t seed = 42;
    /// Only used by incremental training unless set explicitly.
    double dropout = 0.0;
    std::size_t ensemble_size = 3;
    std::vector<std::size_t> hidden = {100, 100};
    EncodingMode encoding = EncodingMode::binary;
    std::vector<OrderConstraint> constraints;
    bool resample_masks_per_epoch = false;
    std::size_t threads = 1;
};

struct IncrementalConfig {
    std::size_t epochs = 20;
    double learning_rate_scale = 0.1;
    double dropout = 0.1;
    std::size_t batch_size = 128;
    std::uint64_t seed = 7;
    std::size_t threads = 1;
};

/// kappa masked models sharing one codec; estimates average member probabilities.
struct MadeEnsemble {
    Schema schema;
    TupleCodec codec;
    std::vector<MadeModel> members;
    TrainConfig config;
    std::size_t trained_rows = 0;

    std::uint64_t fingerprint() const { return schema_fingerprint(schema); }
};

inline Matrix encode_tuples(const TupleCodec& codec, const std::vector<std::vector<Code>>& tuples) {
    Matrix bits = Matrix::Zero(static_cast<Eigen::Index>(codec.total_bits()), static_cast<Eigen::Index>(tuples.size()));
    for (std::size_t c = 0; c < tuples.size(); ++c) {
        codec.encode_into(std::span<const Code>(tuples[c]),
                          std::span<double>(bits.col(static_cast<Eigen::Index>(c)).data(), codec.total_bits()));
    }
    return bits;
}

inline Matrix encode_relation(const TupleCodec& codec, const Relation& relation) {
    if (!relation.fully_encoded()) throw Error("schema", "relation must be fully encoded (discretize numerics first)");
    Matrix bits = Matrix::Zero(static_cast<Eigen::Index>(codec.total_bits()), static_cast<Eigen::Index>(relation.num_rows()));
    std::vector<Code> t(relation.num_attributes());
    for (std::size_t r = 0; r < relation.num_rows(); ++r) {
        for (std::size_t a = 0; a < t.size(); ++a) t[a] = relation.code(r, a);
        codec.encode_into(std::span<const Code>(t),
                          std::span<double>(bits.col(static_cast<Eigen::Index>(r)).data(), codec.total_bits()));
    }
    return bits;
}

inline double log_mean_exp(std::span<const double> values) {
    const double hi = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(hi)) return hi;
    double s = 0.0;
    for (double v : values) s += std::exp(v - hi);
    return hi + std::log(s / static_cast<double>(values.size()));
}

/// log p(tuple) under one member.
inline double tuple_logprob(const MadeModel& model, const TupleCodec& codec, std::span<const Code> codes) {
    std::vector<std::vector<Code>> one{std::vector<Code>(codes.begin(), codes.end())};
    return bits_logprob(model, encode_tuples(codec, one))[0];
}

/// log of the mean member probability.
inline double tuple_logprob(const MadeEnsemble& ensemble, std::span<const Code> codes) {
    std::vector<std::vector<Code>> one{std::vector<Code>(codes.begin(), codes.end())};
    const Matrix bits = encode_tuples(ensemble.codec, one);
    std::vector<double> lps;
    for (const auto& m : ensemble.members) lps.push_back(bits_logprob(m, bits)[0]);
    return log_mean_exp(lps);
}

/// Mean member probability for each full tuple.
inline std::vector<double> tuple_probs(const MadeEnsemble& ensemble, const std::vector<std::vector<Code>>& tuples) {
    const Matrix bits = encode_tuples(ensemble.codec, tuples);
    std::vector<double> out(tuples.size(), 0.0);
    for (const auto& m : ensemble.members) {
        const auto lp = bits_logprob(m, bits);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += std::exp(lp[i]);
    }
    for (auto& v : out) v /= static_cast<double>(ensemble.members.size());
    return out;
}

/// Probability of assignments to `attrs` for a batch of cells, where `attrs`
/// must be exactly the first |attrs| attributes of the model's chain. Later
/// bits are fed as zeros; they cannot reach the conditionals that are used.
inline std::vector<double> prefix_probs(const MadeModel& model, const TupleCodec& codec,
                                        std::span<const std::size_t> attrs, const std::vector<range::Cell>& cells) {
    const auto rank = model.ordering.attribute_rank();
    std::vector<bool> assigned(codec.num_attributes(), false);
    for (auto a : attrs) {
        if (a >= assigned.size() || assigned[a]) throw Error("query", "invalid prefix attribute list");
        if (rank[a] >= attrs.size()) {
            throw Error("prefix", "assigned attributes are not a prefix of the model ordering; use a range estimator");
        }
        assigned[a] = true;
    }
    std::vector<double> out(cells.size(), 1.0);
    if (attrs.empty()) return out;
    Matrix bits = Matrix::Zero(static_cast<Eigen::Index>(codec.total_bits()), static_cast<Eigen::Index>(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::span<double> col(bits.col(static_cast<Eigen::Index>(c)).data(), codec.total_bits());
        for (std::size_t i = 0; i < attrs.size(); ++i) codec.encode_attribute(attrs[i], cells[c].at(i), col);
    }
    const Matrix probs = nn::predict(model.network, bits);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        double lp = 0.0;
        for (auto a : attrs) {
            const auto& s = codec.slice(a);
            for (std::size_t b = s.offset; b < s.offset + s.width; ++b) {
                const auto bi = static_cast<Eigen::Index>(b);
                const auto ci = static_cast<Eigen::Index>(c);
                const double p = std::clamp(probs(bi, ci), kProbEpsilon, 1.0 - kProbEpsilon);
                lp += bits(bi, ci) != 0.0 ? std::log(p) : std::log(1.0 - p);
            }
        }
        out[c] = std::exp(lp);
    }
    return out;
}

inline double prefix_prob(const MadeModel& model, const TupleCodec& codec, const std::vector<PointPredicate>& assignment) {
    std::vector<std::size_t> attrs;
    range::Cell cell;
    for (const auto& p : assignment) {
        attrs.push_back(p.attr);
        cell.push_back(p.code);
    }
    return prefix_probs(model, codec, attrs, {cell})[0];
}

/// How the ensemble answers queries that are not a prefix of a member's chain.
struct EstimateOptions {
    /// Sampling budget per member when a box must be sampled (0 disables sampling).
    std::size_t budget = 500;
    double bootstrap_fraction = 0.2;
    /// Boxes with at most this many cells are enumerated exactly.
    std::uint64_t exhaustive_limit = 512;
    std::uint64_t seed = 1;
};

/// Selectivity of a code-range query under one member. Attributes after the
/// last constrained one in the chain are marginalized for free; unconstrained
/// attributes before it become full-domain ranges, enumerated when the box is
/// small and sampled with adaptive importance sampling otherwise.
/// Returns nullopt when sampling would be needed but the budget is zero.
inline std::optional<double> member_selectivity(const MadeModel& model, const TupleCodec& codec, const RangeQuery& q,
                                                const EstimateOptions& options, Rng& rng) {
    const auto rank = model.ordering.attribute_rank();
    const std::size_t m = codec.num_attributes();
    std::vector<const RangePredicate*> by_attr(m, nullptr);
    std::size_t prefix_len = 0;
    for (const auto& p : q.predicates) {
        by_attr.at(p.attr) = &p;
        prefix_len = std::max(prefix_len, rank[p.attr] + 1);
    }
    if (prefix_len == 0) return 1.0;

    RangeQuery box;
    std::vector<std::size_t> attrs;
    for (std::size_t k = 0; k < prefix_len; ++k) {
        const auto a = model.ordering.attribute_order[k];
        attrs.push_back(a);
        if (by_attr[a]) {
            box.predicates.push_back(*by_attr[a]);
        } else {
            box.predicates.push_back({a, 0, static_cast<Code>(codec.slice(a).domain_size - 1)});
        }
    }
    range::BatchPointEstimator est = [&](const std::vector<range::Cell>& cells) {
        return prefix_probs(model, codec, attrs, cells);
    };
    const auto cells = range::box_cells(box);
    if (cells <= options.exhaustive_limit) return range::estimate_exhaustive(est, box, options.exhaustive_limit);
    if (options.budget == 0) return std::nullopt;
    if (options.budget < 2) return range::estimate_uniform(est, box, options.budget, rng);
    return range::estimate_adaptive_is(est, box, {options.budget, options.bootstrap_fraction}, rng);
}

/// Mean over members of their selectivity estimates for a code-range query.
inline double range_selectivity(const MadeEnsemble& ensemble, const RangeQuery& q, const EstimateOptions& options = {}) {
    validate(ensemble.schema, q);
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
        Rng rng = make_rng(options.seed, i);
        if (auto v = member_selectivity(ensemble.members[i], ensemble.codec, q, options, rng)) {
            sum += *v;
            ++used;
        }
    }
    if (used == 0) throw Error("range", "no member can answer the query without sampling and the budget is zero");
    return sum / static_cast<double>(used);
}

inline double point_selectivity(const MadeEnsemble& ensemble, const PointQuery& q, const EstimateOptions& options = {}) {
    validate(ensemble.schema, q);
    return range_selectivity(ensemble, to_range(q), options);
}

/// Point estimator over cells of `attrs` (partial assignments), for the range module.
inline range::BatchPointEstimator partial_estimator(const MadeEnsemble& ensemble, std::vector<std::size_t> attrs,
                                                    EstimateOptions options = {}) {
    return [&ensemble, attrs = std::move(attrs), options](const std::vector<range::Cell>& cells) {
        std::vector<double> out;
        out.reserve(cells.size());
        for (const auto& c : cells) {
            PointQuery q;
            for (std::size_t i = 0; i < attrs.size(); ++i) q.predicates.push_back({attrs[i], c[i]});
            out.push_back(point_selectivity(ensemble, q, options));
        }
        return out;
    };
}

/// Full-tuple estimator (cells hold one code per attribute, attribute order).
inline range::BatchPointEstimator tuple_estimator(const MadeEnsemble& ensemble) {
    return [&ensemble](const std::vector<range::Cell>& cells) { return tuple_probs(ensemble, cells); };
}

/// w(t): number of workload queries matched by each row.
inline std::vector<double> tuple_weights_from_workload(const Relation& relation, const std::vector<PointQuery>& workload) {
    std::vector<double> w(relation.num_rows(), 0.0);
    for (const auto& q : workload) {
        validate(relation.schema(), q);
        for (std::size_t r = 0; r < relation.num_rows(); ++r) {
            bool match = true;
            for (const auto& p : q.predicates) {
                if (relation.code(r, p.attr) != p.code) {
                    match = false;
                    break;
                }
            }
            if (match) w[r] += 1.0;
        }
    }
    return w;
}

/// Training multipliers 1 + w(t); rows no query touches keep weight one.
inline std::vector<double> training_weights(const std::vector<double>& workload_counts) {
    std::vector<double> w(workload_counts.size());
    std::transform(workload_counts.begin(), workload_counts.end(), w.begin(), [](double c) { return 1.0 + c; });
    return w;
}

namespace detail {

struct FitParams {
    std::size_t epochs;
    std::size_t batch_size;
    double learning_rate;
    double dropout;
    bool resample_masks;
    std::vector<std::size_t> hidden;
};

/// Minibatch Adam on (weighted) cross-entropy; loss per epoch is the mean per row.
/// Gradients are divided by the mean tuple weight so only relative weights
/// matter: uniform weights reproduce the unweighted trajectory exactly, where
/// Adam alone would deviate through its epsilon.
inline void fit_member(MadeModel& model, const Matrix& bits, std::span<const double> weights, const FitParams& params,
                       Rng& rng) {
    const auto n = static_cast<std::size_t>(bits.cols());
    if (n == 0 || params.epochs == 0) return;
    auto adam = nn::AdamState::for_network(model.network, {params.learning_rate, 0.9, 0.999, 1e-8});
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const nn::DropoutSpec dropout{params.dropout, true};
    std::vector<double> batch_w;
    double mean_w = 1.0;
    if (!weights.empty()) {
        mean_w = std::accumulate(weights.begin(), weights.end(), 0.0) / static_cast<double>(n);
        if (mean_w <= 0.0) mean_w = 1.0;
    }
    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
        if (params.resample_masks && epoch > 0) {
            auto masks = build_masks(params.hidden, model.ordering, rng);
            model.set_degrees(std::move(masks.hidden_degrees));
        }
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += params.batch_size) {
            const std::size_t end = std::min(n, start + params.batch_size);
            const auto b = static_cast<Eigen::Index>(end - start);
            Matrix x(bits.rows(), b);
            batch_w.assign(end - start, 1.0);
            for (std::size_t i = start; i < end; ++i) {
                x.col(static_cast<Eigen::Index>(i - start)) = bits.col(static_cast<Eigen::Index>(order[i]));
                if (!weights.empty()) batch_w[i - start] = weights[order[i]];
            }
            const auto cache = nn::forward(model.network, x, params.dropout > 0.0 ? &dropout : nullptr, &rng);
            auto loss = nn::bce_loss(cache.output(), x, batch_w);
            epoch_loss += loss.value;
            auto grads = nn::backward(model.network, cache, loss.grad);
            nn::scale(grads, 1.0 / (static_cast<double>(b) * mean_w));
            nn::adam_step(model.network, grads, adam);
        }
        model.loss_curve.push_back(epoch_loss / static_cast<double>(n));
    }
}

}  // namespace detail

/// Untrained ensemble: members get independent orderings, masks and weights.
inline MadeEnsemble initialize(const Relation& relation, const TrainConfig& config) {
    if (relation.num_rows() == 0) throw Error("domain", "empty relation");
    if (config.ensemble_size < 1) throw Error("config", "ensemble size must be at least 1");
    MadeEnsemble ens;
    ens.schema = relation.schema();
    ens.codec = TupleCodec::for_schema(relation.schema(), config.encoding);
    ens.config = config;
    for (std::size_t i = 0; i < config.ensemble_size; ++i) {
        Rng rng = make_rng(config.seed, i);
        auto ordering = sample_ordering(rng, ens.codec, config.constraints);
        auto member = MadeModel::create(ens.codec, std::move(ordering), config.hidden, rng);
        member.seed = derive_seed(config.seed, i);
        ens.members.push_back(std::move(member));
    }
    return ens;
}

/// Trains every member on the relation by minibatch Adam on cross-entropy,
/// optionally with per-row loss multipliers. Deterministic for a fixed seed,
/// independent of the thread count.
inline MadeEnsemble train(const Relation& relation, const TrainConfig& config,
                          std::span<const double> tuple_weights = {}) {
    if (!tuple_weights.empty() && tuple_weights.size() != relation.num_rows()) {
        throw Error("shape", "one weight per row required");
    }
    for (double w : tuple_weights) {
        if (w < 0.0) throw Error("domain", "negative tuple weight");
    }
    MadeEnsemble ens = initialize(relation, config);
    ens.trained_rows = relation.num_rows();
    const Matrix bits = encode_relation(ens.codec, relation);
    const detail::FitParams params{config.epochs, config.batch_size, config.learning_rate, config.dropout,
                                   config.resample_masks_per_epoch, config.hidden};
    parallel_for(ens.members.size(), config.threads, [&](std::size_t i) {
        Rng rng = make_rng(config.seed, 1000 + i);
        detail::fit_member(ens.members[i], bits, tuple_weights, params, rng);
    });
    return ens;
}

/// Continues training on new rows only, starting from the current weights,
/// with a reduced learning rate, fewer epochs and dropout on mask-active units.
inline MadeEnsemble incremental_train(const MadeEnsemble& ensemble, const Relation& new_rows,
                                      const IncrementalConfig& config = {}) {
    if (!(new_rows.schema() == ensemble.schema)) throw Error("schema", "new rows do not match the model schema");
    MadeEnsemble out = ensemble;
    if (new_rows.num_rows() == 0 || config.epochs == 0) return out;
    const Matrix bits = encode_relation(out.codec, new_rows);
    const detail::FitParams params{config.epochs, config.batch_size,
                                   ensemble.config.learning_rate * config.learning_rate_scale, config.dropout, false,
                                   ensemble.config.hidden};
    parallel_for(out.members.size(), config.threads, [&](std::size_t i) {
        Rng rng = make_rng(config.seed, 2000 + i);
        detail::fit_member(out.members[i], bits, {}, params, rng);
    });
    out.trained_rows += new_rows.num_rows();
    return out;
}

}  // namespace selest::made
