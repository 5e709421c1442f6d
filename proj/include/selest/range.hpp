#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "selest/common.hpp"
#include "selest/relation.hpp"

namespace selest::range {

/// One point inside a range box: a code per predicate, in predicate order.
using Cell = std::vector<Code>;

/// Evaluates point selectivities for a batch of cells. The cell layout is fixed
/// by the RangeQuery the estimator is used with.
using BatchPointEstimator = std::function<std::vector<double>(const std::vector<Cell>&)>;

inline BatchPointEstimator pointwise(std::function<double(const Cell&)> f) {
    return [f = std::move(f)](const std::vector<Cell>& cells) {
        std::vector<double> out;
        out.reserve(cells.size());
        for (const auto& c : cells) out.push_back(f(c));
        return out;
    };
}

/// Sampling budget |S| and the stage layout of the adaptive estimator: a
/// uniform bootstrap share, then `stages` importance-sampled rounds splitting
/// the rest. Each round rebuilds the proposal from all samples so far.
struct RangeBudget {
    std::size_t samples = 500;
    double bootstrap_fraction = 0.2;
    std::size_t stages = 4;
    /// Weight of the uniform component mixed into every proposal.
    double uniform_mix = 0.3;
    /// Exponent applied to observed mass shares; 1 follows them fully, 0 ignores them.
    double damping = 0.3;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 100000;

/// Number of cells in the box, saturating at UINT64_MAX.
inline std::uint64_t box_cells(const RangeQuery& q) {
    std::uint64_t cells = 1;
    for (const auto& p : q.predicates) {
        const std::uint64_t w = static_cast<std::uint64_t>(p.hi - p.lo) + 1;
        if (cells > std::numeric_limits<std::uint64_t>::max() / w) return std::numeric_limits<std::uint64_t>::max();
        cells *= w;
    }
    return cells;
}

/// Box volume as a double product in predicate order. Sampling estimators use
/// this exact product so their arithmetic stays comparable bit for bit.
inline double box_volume(const RangeQuery& q) {
    double v = 1.0;
    for (const auto& p : q.predicates) v *= static_cast<double>(p.hi - p.lo + 1);
    return v;
}

inline void check_box(const RangeQuery& q) {
    for (const auto& p : q.predicates) {
        if (p.lo > p.hi) throw Error("query", "range lower bound exceeds upper bound");
    }
}

/// Sum of point estimates over the full cross product of the ranges.
inline double estimate_exhaustive(const BatchPointEstimator& est, const RangeQuery& q,
                                  std::uint64_t cap = kDefaultEnumerationCap, std::size_t batch_size = 4096) {
    check_box(q);
    const std::uint64_t cells = box_cells(q);
    if (cells > cap) {
        throw Error("range", "range box has " + std::to_string(cells) + " cells, above the enumeration cap of " +
                                 std::to_string(cap) + "; use a sampling estimator");
    }
    const std::size_t k = q.predicates.size();
    Cell cell(k);
    for (std::size_t i = 0; i < k; ++i) cell[i] = q.predicates[i].lo;

    double total = 0.0;
    std::vector<Cell> batch;
    batch.reserve(std::min<std::uint64_t>(cells, batch_size));
    auto flush = [&] {
        for (double v : est(batch)) total += v;
        batch.clear();
    };
    for (std::uint64_t n = 0; n < cells; ++n) {
        batch.push_back(cell);
        if (batch.size() == batch_size) flush();
        // mixed-radix increment, last predicate fastest
        for (std::size_t i = k; i-- > 0;) {
            if (cell[i] < q.predicates[i].hi) {
                ++cell[i];
                break;
            }
            cell[i] = q.predicates[i].lo;
        }
    }
    if (!batch.empty()) flush();
    return total;
}

namespace detail {

inline Cell draw_uniform(const RangeQuery& q, Rng& rng) {
    Cell c(q.predicates.size());
    for (std::size_t i = 0; i < q.predicates.size(); ++i) {
        std::uniform_int_distribution<Code> d(q.predicates[i].lo, q.predicates[i].hi);
        c[i] = d(rng);
    }
    return c;
}

}  // namespace detail

/// Plain Monte Carlo: (V / |S|) * sum of point estimates at uniform cells,
/// accumulated as sum(sel * V) / |S|.
inline double estimate_uniform(const BatchPointEstimator& est, const RangeQuery& q, std::size_t samples, Rng& rng) {
    check_box(q);
    if (samples == 0) throw Error("range", "sampling budget must be at least 1");
    std::vector<Cell> cells;
    cells.reserve(samples);
    for (std::size_t s = 0; s < samples; ++s) cells.push_back(detail::draw_uniform(q, rng));
    const auto values = est(cells);
    const double volume = box_volume(q);
    double sum = 0.0;
    for (double v : values) sum += v * volume;
    return sum / static_cast<double>(samples);
}

/// Per-predicate proposal g_i over the codes of R_i (index 0 is R_i.lo).
/// Probabilities are strictly positive and each g_i sums to one.
struct ProposalHistograms {
    std::vector<std::vector<double>> probability;
    std::vector<std::vector<double>> cumulative;
    /// 1 / g_i(a), kept separately so a uniform proposal yields exactly |R_i|.
    std::vector<std::vector<double>> inverse;
    double smoothing = 1.0;

    static ProposalHistograms uniform(const RangeQuery& q) {
        ProposalHistograms h;
        for (const auto& p : q.predicates) {
            const std::size_t w = p.hi - p.lo + 1;
            h.probability.emplace_back(w, 1.0 / static_cast<double>(w));
            h.inverse.emplace_back(w, static_cast<double>(w));
        }
        h.finish_cumulative();
        return h;
    }

    /// Proposal from per-value estimate mass. Value a of predicate i gets count
    /// smoothing + n * share(a)^damping, with share(a) its fraction of the mass
    /// of predicate i and n the samples seen. The normalized counts are then
    /// mixed with the uniform distribution: g = (1 - mix) * c / sum(c) + mix / |R_i|.
    static ProposalHistograms from_mass(const std::vector<std::vector<double>>& mass, double n, double damping = 1.0,
                                        double mix = 0.0, double smoothing = 1.0) {
        if (smoothing <= 0.0) throw Error("range", "proposal smoothing must be positive");
        ProposalHistograms h;
        h.smoothing = smoothing;
        for (const auto& m : mass) {
            double total_mass = 0.0;
            for (double v : m) total_mass += std::max(v, 0.0);
            std::vector<double> counts(m.size());
            double total = 0.0;
            for (std::size_t a = 0; a < m.size(); ++a) {
                const double share = total_mass > 0.0 ? std::max(m[a], 0.0) / total_mass : 0.0;
                counts[a] = smoothing + n * std::pow(share, damping);
                total += counts[a];
            }
            const double w = static_cast<double>(m.size());
            std::vector<double> prob(m.size()), inv(m.size());
            for (std::size_t a = 0; a < m.size(); ++a) {
                prob[a] = (1.0 - mix) * counts[a] / total + mix / w;
                inv[a] = 1.0 / prob[a];
            }
            h.probability.push_back(std::move(prob));
            h.inverse.push_back(std::move(inv));
        }
        h.finish_cumulative();
        return h;
    }

    /// Single-round bootstrap from uniform cells: mass of value a is the sum of
    /// the estimates of the cells with a_i = a.
    static ProposalHistograms bootstrap(const RangeQuery& q, const std::vector<Cell>& cells,
                                        const std::vector<double>& estimates, double smoothing = 1.0) {
        std::vector<std::vector<double>> mass;
        for (const auto& p : q.predicates) mass.emplace_back(p.hi - p.lo + 1, 0.0);
        for (std::size_t s = 0; s < cells.size(); ++s) {
            for (std::size_t i = 0; i < q.predicates.size(); ++i) mass[i][cells[s][i] - q.predicates[i].lo] += estimates[s];
        }
        return from_mass(mass, static_cast<double>(cells.size()), 1.0, 0.0, smoothing);
    }

    Cell draw(const RangeQuery& q, Rng& rng) const {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Cell c(q.predicates.size());
        for (std::size_t i = 0; i < q.predicates.size(); ++i) {
            const auto& cum = cumulative[i];
            const double x = u(rng) * cum.back();
            auto it = std::upper_bound(cum.begin(), cum.end(), x);
            const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
            c[i] = q.predicates[i].lo + static_cast<Code>(idx);
        }
        return c;
    }

    /// 1 / g(cell) with g the product density over the box.
    double inverse_density(const RangeQuery& q, const Cell& c) const {
        double w = 1.0;
        for (std::size_t i = 0; i < c.size(); ++i) w *= inverse[i][c[i] - q.predicates[i].lo];
        return w;
    }

private:
    void finish_cumulative() {
        cumulative.clear();
        for (const auto& p : probability) {
            std::vector<double> cum(p.size());
            double acc = 0.0;
            for (std::size_t a = 0; a < p.size(); ++a) {
                acc += p[a];
                cum[a] = acc;
            }
            cumulative.push_back(std::move(cum));
        }
    }
};

/// Staged adaptive importance sampling. Stage one draws uniform cells; each
/// later stage samples from the product proposal g built from the importance
/// weighted estimate mass of every earlier sample and reweights by 1/g. A
/// stage's proposal depends only on earlier draws, so every stage is unbiased
/// and the pooled answer sum(sel_i / g(q_i)) / |S| is too (uniform cells carry
/// weight V). With force_uniform every stage draws uniformly, reproducing
/// estimate_uniform draw for draw.
inline double estimate_adaptive_is(const BatchPointEstimator& est, const RangeQuery& q, const RangeBudget& budget,
                                   Rng& rng, bool force_uniform = false) {
    check_box(q);
    if (budget.samples < 2) throw Error("range", "adaptive sampling needs a budget of at least 2");
    if (!(budget.bootstrap_fraction > 0.0) || !(budget.bootstrap_fraction < 1.0)) {
        throw Error("range", "bootstrap fraction must lie in (0, 1)");
    }
    if (budget.stages == 0) throw Error("range", "adaptive sampling needs at least one importance stage");
    if (!(budget.uniform_mix >= 0.0 && budget.uniform_mix <= 1.0) || !(budget.damping >= 0.0 && budget.damping <= 1.0)) {
        throw Error("range", "uniform mix and damping must lie in [0, 1]");
    }
    const auto bootstrap = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(budget.bootstrap_fraction * static_cast<double>(budget.samples))), 1,
        budget.samples - 1);
    const std::size_t rest = budget.samples - bootstrap;
    const std::size_t stages = std::min(budget.stages, rest);
    const double volume = box_volume(q);
    const std::size_t k = q.predicates.size();

    std::vector<std::vector<double>> mass;
    for (const auto& p : q.predicates) mass.emplace_back(p.hi - p.lo + 1, 0.0);
    double sum = 0.0;
    std::size_t used = 0;
    std::vector<Cell> cells;

    cells.reserve(bootstrap);
    for (std::size_t s = 0; s < bootstrap; ++s) cells.push_back(detail::draw_uniform(q, rng));
    const auto first = est(cells);
    for (std::size_t s = 0; s < bootstrap; ++s) {
        const double contribution = first[s] * volume;
        sum += contribution;
        for (std::size_t i = 0; i < k; ++i) mass[i][cells[s][i] - q.predicates[i].lo] += contribution;
    }
    used = bootstrap;

    for (std::size_t stage = 0; stage < stages; ++stage) {
        const std::size_t n = stage + 1 == stages ? budget.samples - used : rest / stages;
        cells.clear();
        if (force_uniform) {
            for (std::size_t s = 0; s < n; ++s) cells.push_back(detail::draw_uniform(q, rng));
            for (double v : est(cells)) sum += v * volume;
        } else {
            const auto proposal = ProposalHistograms::from_mass(mass, static_cast<double>(used), budget.damping,
                                                                budget.uniform_mix);
            for (std::size_t s = 0; s < n; ++s) cells.push_back(proposal.draw(q, rng));
            const auto values = est(cells);
            for (std::size_t s = 0; s < n; ++s) {
                const double contribution = values[s] * proposal.inverse_density(q, cells[s]);
                sum += contribution;
                for (std::size_t i = 0; i < k; ++i) mass[i][cells[s][i] - q.predicates[i].lo] += contribution;
            }
        }
        used += n;
    }
    return sum / static_cast<double>(budget.samples);
}

/// Number of the `distinct_count` values of a bucket, spread evenly over
/// [lo, hi], that fall inside [qlo, qhi].
inline std::uint64_t spread_overlap(const Bucket& b, double qlo, double qhi) {
    if (qhi < b.lo || qlo > b.hi || b.distinct_count == 0) return 0;
    if (b.distinct_count == 1 || b.hi == b.lo) return (b.lo >= qlo && b.lo <= qhi) ? b.distinct_count : 0;
    const double last = static_cast<double>(b.distinct_count - 1);
    const double step = (b.hi - b.lo) / last;
    const double tol = 1e-9;
    const double first_j = std::max(0.0, std::ceil((qlo - b.lo) / step - tol));
    const double last_j = std::min(last, std::floor((qhi - b.lo) / step + tol));
    if (last_j < first_j) return 0;
    return static_cast<std::uint64_t>(last_j - first_j + 1.0);
}

/// Range estimation over raw values for a model trained on bucket codes.
/// Buckets inside the range contribute their full estimate, partially
/// overlapping ones a share proportional to the overlapping distinct values
/// under the uniform spread assumption. `est` receives cells of bucket codes
/// in predicate order.
inline double estimate_bucketed(const BatchPointEstimator& est, const ValueRangeQuery& q, const Schema& schema,
                                std::uint64_t cap = kDefaultEnumerationCap) {
    RangeQuery box;
    std::vector<std::vector<double>> fractions;
    for (const auto& p : q.predicates) {
        if (p.attr >= schema.size()) throw Error("query", "attribute index out of range");
        const auto& meta = schema[p.attr];
        if (p.lo > p.hi) throw Error("query", "range lower bound exceeds upper bound");
        if (!meta.bucketized()) {
            if (meta.kind == AttributeKind::numeric) {
                throw Error("range", "attribute '" + meta.name + "' is not bucketized");
            }
            // categorical bounds are codes
            const double lo = std::max(0.0, std::ceil(p.lo));
            const double hi = std::min(static_cast<double>(meta.domain_size) - 1.0, std::floor(p.hi));
            if (hi < lo) return 0.0;
            box.predicates.push_back({p.attr, static_cast<Code>(lo), static_cast<Code>(hi)});
            fractions.emplace_back(static_cast<std::size_t>(hi - lo) + 1, 1.0);
            continue;
        }
        std::vector<double> frac;
        Code first = 0;
        bool any = false;
        for (std::size_t b = 0; b < meta.buckets.size(); ++b) {
            const auto overlap = spread_overlap(meta.buckets[b], p.lo, p.hi);
            if (overlap == 0) {
                if (any) break;
                continue;
            }
            if (!any) first = static_cast<Code>(b);
            any = true;
            frac.push_back(static_cast<double>(overlap) / static_cast<double>(meta.buckets[b].distinct_count));
        }
        if (!any) return 0.0;
        box.predicates.push_back({p.attr, first, static_cast<Code>(first + frac.size() - 1)});
        fractions.push_back(std::move(frac));
    }
    BatchPointEstimator weighted = [&](const std::vector<Cell>& cells) {
        auto values = est(cells);
        for (std::size_t s = 0; s < cells.size(); ++s) {
            for (std::size_t i = 0; i < cells[s].size(); ++i) {
                values[s] *= fractions[i][cells[s][i] - box.predicates[i].lo];
            }
        }
        return values;
    };
    return estimate_exhaustive(weighted, box, cap);
}

}  // namespace selest::range
