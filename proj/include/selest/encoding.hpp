#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "selest/common.hpp"
#include "selest/relation.hpp"

namespace selest {

enum class EncodingMode { binary, onehot };

inline const char* to_string(EncodingMode mode) { return mode == EncodingMode::binary ? "binary" : "onehot"; }

/// Marker for a binary slice whose bit pattern decodes past the domain.
inline constexpr Code kInvalidCode = std::numeric_limits<Code>::max();

inline std::size_t binary_width(std::size_t domain_size) {
    if (domain_size <= 2) return 1;
    return static_cast<std::size_t>(std::bit_width(domain_size - 1));
}

struct AttributeSlice {
    std::size_t offset = 0;
    std::size_t width = 0;
    std::size_t domain_size = 0;
    bool operator==(const AttributeSlice&) const = default;
};

/// Tuple -> bit vector layout. Binary slices are MSB-first; one-hot slices put
/// code c at position width-1-c, so code 0 of a 4-value domain reads 0001.
class TupleCodec {
public:
    TupleCodec() = default;
    TupleCodec(EncodingMode mode, std::span<const std::size_t> domain_sizes) : mode_(mode) {
        std::size_t offset = 0;
        for (auto d : domain_sizes) {
            if (d == 0) throw Error("schema", "attribute with empty domain cannot be encoded");
            const std::size_t w = mode == EncodingMode::binary ? binary_width(d) : d;
            slices_.push_back({offset, w, d});
            offset += w;
        }
        total_bits_ = offset;
    }

    static TupleCodec for_schema(const Schema& schema, EncodingMode mode) {
        std::vector<std::size_t> sizes;
        for (const auto& a : schema) {
            if (!a.encoded()) throw Error("schema", "attribute '" + a.name + "' must be discretized before encoding");
            sizes.push_back(a.domain_size);
        }
        return TupleCodec(mode, sizes);
    }

    EncodingMode mode() const { return mode_; }
    std::size_t total_bits() const { return total_bits_; }
    std::size_t num_attributes() const { return slices_.size(); }
    const std::vector<AttributeSlice>& slices() const { return slices_; }
    const AttributeSlice& slice(std::size_t attr) const { return slices_.at(attr); }

    /// Writes the slice of `attr` into `out` (which spans the whole tuple).
    template <typename T>
    void encode_attribute(std::size_t attr, Code code, std::span<T> out) const {
        const auto& s = slices_[attr];
        if (code >= s.domain_size) {
            throw Error("domain", "code " + std::to_string(code) + " outside domain of size " +
                                      std::to_string(s.domain_size));
        }
        if (mode_ == EncodingMode::binary) {
            for (std::size_t b = 0; b < s.width; ++b) {
                out[s.offset + b] = static_cast<T>((code >> (s.width - 1 - b)) & 1U);
            }
        } else {
            for (std::size_t b = 0; b < s.width; ++b) out[s.offset + b] = T(0);
            out[s.offset + s.width - 1 - code] = T(1);
        }
    }

    template <typename T>
    void encode_into(std::span<const Code> codes, std::span<T> out) const {
        if (codes.size() != slices_.size()) throw Error("domain", "tuple arity does not match codec");
        if (out.size() != total_bits_) throw Error("domain", "output buffer length does not match codec");
        for (std::size_t a = 0; a < slices_.size(); ++a) encode_attribute(a, codes[a], out);
    }

    std::vector<std::uint8_t> encode(std::span<const Code> codes) const {
        std::vector<std::uint8_t> bits(total_bits_);
        encode_into(codes, std::span<std::uint8_t>(bits));
        return bits;
    }

    /// Inverse of encode. Binary slices past the domain decode to kInvalidCode;
    /// malformed one-hot slices are an error.
    template <typename T>
    std::vector<Code> decode(std::span<const T> bits) const {
        if (bits.size() != total_bits_) {
            throw Error("domain", "bit vector has length " + std::to_string(bits.size()) + ", codec expects " +
                                      std::to_string(total_bits_));
        }
        std::vector<Code> codes(slices_.size());
        for (std::size_t a = 0; a < slices_.size(); ++a) {
            const auto& s = slices_[a];
            if (mode_ == EncodingMode::binary) {
                std::uint64_t v = 0;
                for (std::size_t b = 0; b < s.width; ++b) v = (v << 1) | (bits[s.offset + b] != T(0) ? 1U : 0U);
                codes[a] = v < s.domain_size ? static_cast<Code>(v) : kInvalidCode;
            } else {
                std::size_t set = 0;
                Code code = 0;
                for (std::size_t b = 0; b < s.width; ++b) {
                    if (bits[s.offset + b] != T(0)) {
                        ++set;
                        code = static_cast<Code>(s.width - 1 - b);
                    }
                }
                if (set != 1) {
                    throw Error("domain", "one-hot slice of attribute " + std::to_string(a) + " has " +
                                              std::to_string(set) + " bits set");
                }
                codes[a] = code;
            }
        }
        return codes;
    }

    bool operator==(const TupleCodec&) const = default;

private:
    EncodingMode mode_ = EncodingMode::binary;
    std::vector<AttributeSlice> slices_;
    std::size_t total_bits_ = 0;
};

enum class QueryLayout { point, range };

inline const char* to_string(QueryLayout layout) { return layout == QueryLayout::point ? "point" : "range"; }

/// Query -> feature vector layout for the supervised estimator.
///
/// Point layout: per attribute a (domain_size + 1)-wide one-hot slice with the
/// wildcard in the last slot. Range layout: per attribute a (lb, ub) pair
/// min-max scaled to [0, 1]; wildcards become (0, 1).
struct QueryFeaturizer {
    QueryLayout layout = QueryLayout::point;
    std::vector<std::size_t> domain_sizes;
    /// Raw-value bounds used to scale ValueRangeQuery predicates on numeric attributes.
    std::vector<bool> numeric;
    std::vector<double> value_min;
    std::vector<double> value_max;

    static QueryFeaturizer for_relation(const Relation& relation, QueryLayout layout) {
        QueryFeaturizer f;
        f.layout = layout;
        for (std::size_t a = 0; a < relation.num_attributes(); ++a) {
            const auto& meta = relation.attribute(a);
            if (!meta.encoded()) throw Error("schema", "attribute '" + meta.name + "' must be encoded");
            f.domain_sizes.push_back(meta.domain_size);
            const bool is_numeric = meta.kind == AttributeKind::numeric && relation.raw_column(a).size() == relation.num_rows();
            f.numeric.push_back(is_numeric);
            if (is_numeric) {
                auto [lo, hi] = std::minmax_element(relation.raw_column(a).begin(), relation.raw_column(a).end());
                f.value_min.push_back(*lo);
                f.value_max.push_back(*hi);
            } else {
                f.value_min.push_back(0.0);
                f.value_max.push_back(static_cast<double>(meta.domain_size - 1));
            }
        }
        return f;
    }

    std::size_t num_attributes() const { return domain_sizes.size(); }

    std::size_t width() const {
        if (layout == QueryLayout::range) return 2 * domain_sizes.size();
        std::size_t w = 0;
        for (auto d : domain_sizes) w += d + 1;
        return w;
    }

    std::vector<double> featurize(const PointQuery& q) const {
        if (layout == QueryLayout::range) return featurize(to_range(q));
        check_attrs(q.predicates);
        std::vector<double> x(width(), 0.0);
        std::vector<std::size_t> offsets(domain_sizes.size());
        std::size_t off = 0;
        for (std::size_t a = 0; a < domain_sizes.size(); ++a) {
            offsets[a] = off;
            x[off + domain_sizes[a]] = 1.0;  // wildcard until overwritten
            off += domain_sizes[a] + 1;
        }
        for (const auto& p : q.predicates) {
            if (p.code >= domain_sizes[p.attr]) {
                throw Error("query", "unknown value code " + std::to_string(p.code) + " for attribute " +
                                         std::to_string(p.attr));
            }
            x[offsets[p.attr] + domain_sizes[p.attr]] = 0.0;
            x[offsets[p.attr] + p.code] = 1.0;
        }
        return x;
    }

    std::vector<double> featurize(const RangeQuery& q) const {
        if (layout != QueryLayout::range) throw Error("query", "point-layout featurizer cannot encode range queries");
        check_attrs(q.predicates);
        std::vector<double> x = wildcard_ranges();
        for (const auto& p : q.predicates) {
            if (p.lo > p.hi) throw Error("query", "range lower bound exceeds upper bound");
            if (p.hi >= domain_sizes[p.attr]) throw Error("query", "range exceeds attribute domain");
            const double span = static_cast<double>(domain_sizes[p.attr] - 1);
            x[2 * p.attr] = span > 0 ? static_cast<double>(p.lo) / span : 0.0;
            x[2 * p.attr + 1] = span > 0 ? static_cast<double>(p.hi) / span : 1.0;
        }
        return x;
    }

    /// Numeric attributes are scaled by their observed raw min/max, categorical
    /// bounds are codes. One-sided ranges may pass +-infinity for the open side.
    std::vector<double> featurize(const ValueRangeQuery& q) const {
        if (layout != QueryLayout::range) throw Error("query", "point-layout featurizer cannot encode range queries");
        check_attrs(q.predicates);
        std::vector<double> x = wildcard_ranges();
        for (const auto& p : q.predicates) {
            if (p.lo > p.hi) throw Error("query", "range lower bound exceeds upper bound");
            const double lo = value_min[p.attr];
            const double span = value_max[p.attr] - lo;
            auto scale = [&](double v, double fallback) {
                if (span <= 0) return fallback;
                return std::clamp((v - lo) / span, 0.0, 1.0);
            };
            x[2 * p.attr] = scale(p.lo, 0.0);
            x[2 * p.attr + 1] = scale(p.hi, 1.0);
        }
        return x;
    }

    bool operator==(const QueryFeaturizer&) const = default;

private:
    std::vector<double> wildcard_ranges() const {
        std::vector<double> x(2 * domain_sizes.size());
        for (std::size_t a = 0; a < domain_sizes.size(); ++a) {
            x[2 * a] = 0.0;
            x[2 * a + 1] = 1.0;
        }
        return x;
    }

    template <typename Pred>
    void check_attrs(const std::vector<Pred>& preds) const {
        std::vector<bool> seen(domain_sizes.size(), false);
        for (const auto& p : preds) {
            if (p.attr >= domain_sizes.size()) throw Error("query", "attribute index out of range");
            if (seen[p.attr]) throw Error("query", "attribute constrained twice");
            seen[p.attr] = true;
        }
    }
};

}  // namespace selest
