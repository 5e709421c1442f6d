#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace selest {

/// Every recoverable failure in the library surfaces as this exception.
/// `kind` is a short machine-readable tag ("parse", "schema", "domain", ...)
/// that the CLI echoes in its error line.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

using Code = std::uint32_t;
using Rng = std::mt19937_64;

/// Probability clamp inside logarithms.
inline constexpr double kProbEpsilon = 1e-7;

/// Lower clamp for selectivity estimates on a relation with `n` rows.
inline double selectivity_floor(std::size_t n) { return 1.0 / (10.0 * static_cast<double>(n)); }

/// Derives an independent stream from (seed, stream index) with splitmix64 so
/// that per-query or per-member randomness does not depend on scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) { return Rng(derive_seed(seed, stream)); }

/// 64-bit FNV-1a, used for schema fingerprints.
class Fnv1a {
public:
    void update(const std::string& s) {
        for (unsigned char c : s) {
            hash_ ^= c;
            hash_ *= 0x100000001B3ULL;
        }
        // field separator so that ("ab","c") and ("a","bc") differ
        hash_ ^= 0xFF;
        hash_ *= 0x100000001B3ULL;
    }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 0xCBF29CE484222325ULL;
};

/// Runs fn(0..count-1) on up to `threads` workers. Work items must not depend
/// on each other; the first exception (by index) is rethrown after all finish.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, count); ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace selest
