#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "selest/common.hpp"

namespace selest {

/// Selectivity <-> regression target: s' = (|log10 s| - min) / (max - min).
struct SelTransform {
    double min_abs_log = 0.0;
    double max_abs_log = 1.0;

    double abs_log(double s) const { return std::abs(std::log10(s)); }

    double forward(double s) const {
        if (!(s > 0.0) || s > 1.0) throw Error("domain", "selectivity must lie in (0, 1]");
        return (abs_log(s) - min_abs_log) / (max_abs_log - min_abs_log);
    }

    /// Like forward, but abs-logs outside [min, max] are clamped to the boundary.
    double forward_clamped(double s) const {
        if (!(s > 0.0) || s > 1.0) throw Error("domain", "selectivity must lie in (0, 1]");
        const double l = std::clamp(abs_log(s), min_abs_log, max_abs_log);
        return (l - min_abs_log) / (max_abs_log - min_abs_log);
    }

    double inverse(double scaled) const { return std::pow(10.0, -(scaled * (max_abs_log - min_abs_log) + min_abs_log)); }

    /// d inverse / d scaled
    double inverse_derivative(double scaled) const {
        return -inverse(scaled) * std::log(10.0) * (max_abs_log - min_abs_log);
    }

    bool operator==(const SelTransform&) const = default;
};

struct FittedTransform {
    SelTransform transform;
    std::vector<double> scaled;
};

inline FittedTransform fit_transform(std::span<const double> selectivities) {
    if (selectivities.empty()) throw Error("domain", "cannot fit a transform on no selectivities");
    SelTransform t;
    t.min_abs_log = std::numeric_limits<double>::infinity();
    t.max_abs_log = -std::numeric_limits<double>::infinity();
    for (double s : selectivities) {
        if (!(s > 0.0) || s > 1.0) throw Error("domain", "selectivity must lie in (0, 1]");
        const double l = t.abs_log(s);
        t.min_abs_log = std::min(t.min_abs_log, l);
        t.max_abs_log = std::max(t.max_abs_log, l);
    }
    if (!(t.max_abs_log > t.min_abs_log)) throw Error("domain", "degenerate selectivities: all abs-log values are equal");
    FittedTransform out{t, {}};
    out.scaled.reserve(selectivities.size());
    for (double s : selectivities) out.scaled.push_back(t.forward(s));
    return out;
}

}  // namespace selest
