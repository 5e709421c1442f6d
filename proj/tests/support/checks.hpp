#pragma once

// Shared numeric checks for the unit suite and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "selest/encoding.hpp"
#include "selest/made.hpp"
#include "selest/neural.hpp"

namespace selest::checks {

using nn::Matrix;

/// ||a - b|| / max(||a||, ||b||), with 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::sqrt(std::max(na, nb));
    return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

/// Central differences of a scalar function of a parameter vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline std::vector<double> flatten(const nn::Network& net) {
    std::vector<double> out;
    for (const auto& l : net.layers) {
        out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
        out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return out;
}

inline void unflatten(nn::Network& net, const std::vector<double>& p) {
    std::size_t i = 0;
    for (auto& l : net.layers) {
        std::copy(p.begin() + static_cast<std::ptrdiff_t>(i), p.begin() + static_cast<std::ptrdiff_t>(i + l.weights.size()),
                  l.weights.data());
        i += static_cast<std::size_t>(l.weights.size());
        std::copy(p.begin() + static_cast<std::ptrdiff_t>(i), p.begin() + static_cast<std::ptrdiff_t>(i + l.bias.size()),
                  l.bias.data());
        i += static_cast<std::size_t>(l.bias.size());
    }
}

inline std::vector<double> flatten(const nn::Gradients& g) {
    std::vector<double> out;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        out.insert(out.end(), g.weights[l].data(), g.weights[l].data() + g.weights[l].size());
        out.insert(out.end(), g.bias[l].data(), g.bias[l].data() + g.bias[l].size());
    }
    return out;
}

/// Network with random (possibly masked) layers and biases, for gradient checks.
inline nn::Network random_network(Rng& rng, bool masked, nn::Activation out_act) {
    std::uniform_int_distribution<std::size_t> width(2, 6);
    std::uniform_int_distribution<int> act(0, 2);
    const std::size_t layers = 1 + rng() % 3;
    std::vector<std::size_t> sizes{width(rng)};
    std::vector<nn::Activation> acts;
    for (std::size_t l = 0; l < layers; ++l) {
        sizes.push_back(l + 1 == layers ? width(rng) : width(rng));
        acts.push_back(l + 1 == layers ? out_act : static_cast<nn::Activation>(act(rng)));
    }
    auto net = nn::Network::dense(sizes, acts, rng);
    std::normal_distribution<double> n(0.0, 0.5);
    std::bernoulli_distribution keep(0.6);
    for (auto& l : net.layers) {
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = n(rng);
        if (masked) {
            l.mask = Matrix(l.weights.rows(), l.weights.cols());
            for (Eigen::Index i = 0; i < l.mask.size(); ++i) l.mask.data()[i] = keep(rng) ? 1.0 : 0.0;
        }
    }
    return net;
}

struct GradientCase {
    double relative_error = 0.0;
    bool masked_entries_zero = true;
};

/// Compares backward() for `loss(forward(x))` with central differences over
/// every weight and bias. `loss` returns value and dLoss/dOutput.
inline GradientCase check_network_gradient(nn::Network net, const Matrix& x,
                                           const std::function<nn::LossResult(const Matrix&)>& loss) {
    const auto cache = nn::forward(net, x);
    const auto grads = nn::backward(net, cache, loss(cache.output()).grad);
    GradientCase out;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (!net.layers[l].masked()) continue;
        const Matrix& m = net.layers[l].mask;
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            if (m.data()[i] == 0.0 && grads.weights[l].data()[i] != 0.0) out.masked_entries_zero = false;
        }
    }
    auto f = [&](const std::vector<double>& p) {
        nn::Network copy = net;
        unflatten(copy, p);
        return loss(nn::predict(copy, x)).value;
    };
    auto numeric = numeric_gradient(f, flatten(net));
    // masked weights have no effect, so their numeric derivative is zero too
    out.relative_error = relative_error(flatten(grads), numeric);
    return out;
}

struct GradientSuiteResult {
    double worst = 0.0;
    std::size_t cases = 0;
    bool masks_respected = true;
};

/// Randomized gradient checks for one loss family.
/// kind: 0 masked dense layers under a linear probe, 1 BCE, 2 weighted BCE, 3 MSE, 4 q-error.
inline GradientSuiteResult gradient_suite(int kind, std::size_t cases, std::uint64_t seed) {
    GradientSuiteResult r;
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.05, 0.95);
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t batch = 1 + rng() % 4;
        nn::Activation out_act = kind == 1 || kind == 2 ? nn::Activation::sigmoid : nn::Activation::identity;
        if (kind == 0) out_act = static_cast<nn::Activation>(rng() % 3);
        auto net = random_network(rng, kind <= 2, out_act);
        if (kind == 4) {
            // scalar regressor output
            auto& last = net.layers.back();
            last.weights.conservativeResize(1, Eigen::NoChange);
            last.bias.conservativeResize(1);
            if (last.masked()) last.mask.conservativeResize(1, Eigen::NoChange);
            last.activation = nn::Activation::sigmoid;
        }
        Matrix x(static_cast<Eigen::Index>(net.input_size()), static_cast<Eigen::Index>(batch));
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
        const auto outputs = static_cast<Eigen::Index>(net.output_size());
        Matrix target(outputs, static_cast<Eigen::Index>(batch));
        for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = kind == 1 || kind == 2 ? (rng() % 2) : n(rng);
        std::vector<double> weights(batch);
        for (auto& w : weights) w = 0.5 + u01(rng);
        std::function<nn::LossResult(const Matrix&)> loss;
        switch (kind) {
            case 0: {
                Matrix probe(outputs, static_cast<Eigen::Index>(batch));
                for (Eigen::Index i = 0; i < probe.size(); ++i) probe.data()[i] = n(rng);
                loss = [probe](const Matrix& p) { return nn::LossResult{p.cwiseProduct(probe).sum(), probe}; };
                break;
            }
            case 1: loss = [target](const Matrix& p) { return nn::bce_loss(p, target); }; break;
            case 2: {
                const double w = 0.5 + u01(rng);
                loss = [target, w](const Matrix& p) { return nn::weighted_bce_loss(p, target, w); };
                break;
            }
            case 3: loss = [target, weights](const Matrix& p) { return nn::mse_loss(p, target, weights); }; break;
            default: {
                const SelTransform t{0.2, 3.5};
                std::vector<double> truth(batch);
                for (auto& s : truth) s = std::pow(10.0, -(0.3 + 3.0 * u01(rng)));
                const auto form = rng() % 2 ? nn::QErrorForm::max : nn::QErrorForm::sum;
                loss = [t, truth, weights, form](const Matrix& p) {
                    return nn::qerror_loss(p, truth, t, 1e-9, weights, form);
                };
            }
        }
        const auto res = check_network_gradient(net, x, loss);
        r.worst = std::max(r.worst, res.relative_error);
        r.masks_respected = r.masks_respected && res.masked_entries_zero;
        ++r.cases;
    }
    return r;
}

/// Counts violations of the autoregressive property on one member: flipping
/// input bit j may only change outputs whose chain position exceeds j's.
inline std::size_t autoregressive_violations(const made::MadeModel& model, Rng& rng, std::size_t probes = 4) {
    const auto& pos = model.ordering.bit_position;
    const auto d = static_cast<Eigen::Index>(pos.size());
    std::size_t violations = 0;
    std::bernoulli_distribution coin(0.5);
    for (std::size_t t = 0; t < probes; ++t) {
        Matrix x(d, 1);
        for (Eigen::Index i = 0; i < d; ++i) x(i, 0) = coin(rng) ? 1.0 : 0.0;
        const Matrix base = nn::predict(model.network, x);
        for (Eigen::Index j = 0; j < d; ++j) {
            Matrix y = x;
            y(j, 0) = 1.0 - y(j, 0);
            const Matrix moved = nn::predict(model.network, y);
            for (Eigen::Index k = 0; k < d; ++k) {
                if (pos[static_cast<std::size_t>(j)] >= pos[static_cast<std::size_t>(k)] && moved(k, 0) != base(k, 0)) {
                    ++violations;
                }
            }
        }
    }
    return violations;
}

struct ExhaustiveMaskCheck {
    std::size_t violations = 0;
    /// (input j, output k) pairs allowed to interact, and how many actually did
    std::size_t allowed_pairs = 0;
    std::size_t allowed_pairs_active = 0;
};

/// Flips every bit of every one of the 2^D inputs. Output k must not move when
/// the flipped input's chain position is >= k's.
inline ExhaustiveMaskCheck autoregressive_exhaustive(const made::MadeModel& model) {
    const auto& pos = model.ordering.bit_position;
    const auto d = static_cast<Eigen::Index>(pos.size());
    const auto n = Eigen::Index{1} << d;
    Matrix x(d, n);
    for (Eigen::Index v = 0; v < n; ++v) {
        for (Eigen::Index b = 0; b < d; ++b) x(b, v) = static_cast<double>((v >> b) & 1);
    }
    const Matrix base = nn::predict(model.network, x);
    ExhaustiveMaskCheck out;
    for (Eigen::Index j = 0; j < d; ++j) {
        Matrix y = x;
        y.row(j) = (1.0 - x.row(j).array()).matrix();
        const Matrix moved = nn::predict(model.network, y);
        for (Eigen::Index k = 0; k < d; ++k) {
            std::size_t changed = 0;
            for (Eigen::Index v = 0; v < n; ++v) changed += moved(k, v) != base(k, v) ? 1 : 0;
            if (pos[static_cast<std::size_t>(j)] >= pos[static_cast<std::size_t>(k)]) {
                out.violations += changed;
            } else {
                ++out.allowed_pairs;
                out.allowed_pairs_active += changed > 0 ? 1 : 0;
            }
        }
    }
    return out;
}

/// Sum of p(x) over all 2^D bit vectors (invalid codes included).
inline double total_mass(const made::MadeModel& model, std::size_t bits) {
    const std::size_t n = std::size_t{1} << bits;
    double total = 0.0;
    const std::size_t chunk = 4096;
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t end = std::min(n, start + chunk);
        Matrix x(static_cast<Eigen::Index>(bits), static_cast<Eigen::Index>(end - start));
        for (std::size_t v = start; v < end; ++v) {
            for (std::size_t b = 0; b < bits; ++b) {
                x(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(v - start)) = static_cast<double>((v >> b) & 1U);
            }
        }
        for (double lp : made::bits_logprob(model, x)) total += std::exp(lp);
    }
    return total;
}

}  // namespace selest::checks
