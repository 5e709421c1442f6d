#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "selest/common.hpp"
#include "selest/csv.hpp"
#include "selest/relation.hpp"

namespace selest::synthetic {

/// Zipf(s) sampler over {0..n-1} by inverse CDF.
class Zipf {
public:
    Zipf(std::size_t n, double s) : cdf_(n) {
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            total += 1.0 / std::pow(static_cast<double>(k + 1), s);
            cdf_[k] = total;
        }
        for (auto& c : cdf_) c /= total;
    }

    std::size_t operator()(Rng& rng) const {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double r = u(rng);
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), r);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    }

private:
    std::vector<double> cdf_;
};

/// Six columns with Zipf-skewed marginals:
///   region  Zipf(1.1) over 10 labels
///   zone    region mod 5, a functional dependency region -> zone
///   channel Zipf(1.3) over 4 labels
///   tier    channel / 2 with probability 0.8, otherwise uniform over 3
///   age     integer, 30 + 2.5 * region + N(0, 10), clipped to [18, 90]
///   hours   integer, 10 + 0.5 * age + N(0, 8), clipped to [1, 99]
inline csv::Table census_like_table(std::size_t rows, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0);
    const Zipf region_dist(10, 1.1);
    const Zipf channel_dist(4, 1.3);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> tier_any(0, 2);

    csv::Table t;
    t.header = {"region", "zone", "channel", "tier", "age", "hours"};
    t.rows.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto region = region_dist(rng);
        const auto zone = region % 5;
        const auto channel = channel_dist(rng);
        const int tier = u(rng) < 0.8 ? static_cast<int>(std::min<std::size_t>(channel / 2, 2)) : tier_any(rng);
        const double age = std::clamp(std::round(30.0 + 2.5 * static_cast<double>(region) + 10.0 * noise(rng)), 18.0, 90.0);
        const double hours = std::clamp(std::round(10.0 + 0.5 * age + 8.0 * noise(rng)), 1.0, 99.0);
        t.rows.push_back({"r" + std::to_string(region), "z" + std::to_string(zone), "c" + std::to_string(channel),
                          "t" + std::to_string(tier), format_number(age), format_number(hours)});
    }
    return t;
}

inline SchemaHints census_like_hints() {
    SchemaHints hints;
    hints["age"] = ColumnHint{AttributeKind::numeric, 8};
    hints["hours"] = ColumnHint{AttributeKind::numeric, 4};
    return hints;
}

/// Ingested and fully encoded (binary width 16 bits in total).
inline Relation census_like(std::size_t rows = 5000, std::uint64_t seed = 2019) {
    const auto hints = census_like_hints();
    return encode_numeric_attributes(ingest_table(census_like_table(rows, seed), hints), 8, hints);
}

}  // namespace selest::synthetic
