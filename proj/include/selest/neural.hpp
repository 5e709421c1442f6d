#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "selest/common.hpp"
#include "selest/transform.hpp"

namespace selest::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { identity, relu, sigmoid };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
    }
    return "identity";
}

/// y = act((mask .* W) x + b). An empty mask means fully connected.
struct DenseLayer {
    Matrix weights;  // out x in
    Vector bias;
    Matrix mask;  // out x in of 0/1, or empty
    Activation activation = Activation::identity;

    std::size_t inputs() const { return static_cast<std::size_t>(weights.cols()); }
    std::size_t outputs() const { return static_cast<std::size_t>(weights.rows()); }
    bool masked() const { return mask.size() != 0; }
    Matrix effective_weights() const { return masked() ? Matrix(weights.cwiseProduct(mask)) : weights; }

    /// Units with at least one live incoming connection.
    std::vector<bool> active_units() const {
        std::vector<bool> active(outputs(), true);
        if (!masked()) return active;
        for (Eigen::Index r = 0; r < mask.rows(); ++r) active[r] = mask.row(r).any();
        return active;
    }
};

struct Network {
    std::vector<DenseLayer> layers;

    std::size_t input_size() const { return layers.empty() ? 0 : layers.front().inputs(); }
    std::size_t output_size() const { return layers.empty() ? 0 : layers.back().outputs(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }

    /// Fully connected network; weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    static Network dense(std::span<const std::size_t> sizes, std::span<const Activation> activations, Rng& rng) {
        if (sizes.size() < 2 || activations.size() != sizes.size() - 1) {
            throw Error("shape", "network needs one activation per layer");
        }
        Network net;
        for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
            DenseLayer layer;
            const auto in = static_cast<Eigen::Index>(sizes[i]);
            const auto out = static_cast<Eigen::Index>(sizes[i + 1]);
            const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
            std::uniform_real_distribution<double> u(-limit, limit);
            layer.weights.resize(out, in);
            for (Eigen::Index c = 0; c < in; ++c) {
                for (Eigen::Index r = 0; r < out; ++r) layer.weights(r, c) = u(rng);
            }
            layer.bias = Vector::Zero(out);
            layer.activation = activations[i];
            net.layers.push_back(std::move(layer));
        }
        return net;
    }
};

inline void activate(Activation a, Matrix& z) {
    switch (a) {
        case Activation::identity: break;
        case Activation::relu: z = z.cwiseMax(0.0); break;
        case Activation::sigmoid: z = (1.0 + (-z.array()).exp()).inverse().matrix(); break;
    }
}

/// Dropout request for a training-mode forward pass. Applied to hidden layers only.
struct DropoutSpec {
    double p = 0.0;
    /// Never drop units whose incoming mask row is entirely zero.
    bool respect_masks = true;
};

/// Zeroes each eligible unit (row) independently per sample with probability p
/// and rescales survivors by 1/(1-p). Returns the multiplicative mask used.
inline Matrix apply_dropout(Matrix& activations, double p, Rng& rng, const std::vector<bool>& eligible = {}) {
    if (p < 0.0 || p >= 1.0) throw Error("domain", "dropout probability must lie in [0, 1)");
    Matrix scale = Matrix::Ones(activations.rows(), activations.cols());
    if (p == 0.0) return scale;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = 1.0 / (1.0 - p);
    for (Eigen::Index c = 0; c < activations.cols(); ++c) {
        for (Eigen::Index r = 0; r < activations.rows(); ++r) {
            if (!eligible.empty() && !eligible[static_cast<std::size_t>(r)]) continue;
            scale(r, c) = u(rng) < p ? 0.0 : keep;
        }
    }
    activations.array() *= scale.array();
    return scale;
}

/// Per-layer values retained by forward() for backward(). Columns are samples.
struct ForwardCache {
    std::vector<Matrix> inputs;       // input fed to layer l (after dropout of layer l-1)
    std::vector<Matrix> activations;  // act(z) of layer l, before dropout
    std::vector<Matrix> dropout;      // scale mask applied after layer l (empty when none)

    const Matrix& output() const { return activations.back(); }
};

/// Forward pass over a batch (input is in x batch). Dropout, when requested,
/// is applied after every hidden layer.
inline ForwardCache forward(const Network& net, const Matrix& input, const DropoutSpec* dropout = nullptr,
                            Rng* rng = nullptr) {
    if (static_cast<std::size_t>(input.rows()) != net.input_size()) {
        throw Error("shape", "input has " + std::to_string(input.rows()) + " rows, network expects " +
                                 std::to_string(net.input_size()));
    }
    if (dropout && dropout->p > 0.0 && !rng) throw Error("shape", "dropout requires a random stream");
    ForwardCache cache;
    cache.inputs.reserve(net.layers.size());
    cache.activations.reserve(net.layers.size());
    cache.dropout.resize(net.layers.size());
    Matrix x = input;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        Matrix z = layer.effective_weights() * x;
        z.colwise() += layer.bias;
        activate(layer.activation, z);
        cache.inputs.push_back(std::move(x));
        cache.activations.push_back(z);
        x = std::move(z);
        const bool hidden = l + 1 < net.layers.size();
        if (hidden && dropout && dropout->p > 0.0) {
            std::vector<bool> eligible;
            if (dropout->respect_masks) eligible = layer.active_units();
            cache.dropout[l] = apply_dropout(x, dropout->p, *rng, eligible);
        }
    }
    return cache;
}

/// Inference: no dropout, returns only the output.
inline Matrix predict(const Network& net, const Matrix& input) {
    if (static_cast<std::size_t>(input.rows()) != net.input_size()) {
        throw Error("shape", "input has " + std::to_string(input.rows()) + " rows, network expects " +
                                 std::to_string(net.input_size()));
    }
    Matrix x = input;
    for (const auto& layer : net.layers) {
        Matrix z = layer.effective_weights() * x;
        z.colwise() += layer.bias;
        activate(layer.activation, z);
        x = std::move(z);
    }
    return x;
}

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> bias;
};

/// Reverse-mode gradients of sum_columns(loss) given dLoss/dOutput.
/// Masked-out weight entries receive exactly zero.
inline Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& output_grad) {
    if (cache.activations.size() != net.layers.size()) throw Error("shape", "cache does not match network");
    if (output_grad.rows() != cache.output().rows() || output_grad.cols() != cache.output().cols()) {
        throw Error("shape", "output gradient shape does not match forward output");
    }
    Gradients g;
    g.weights.resize(net.layers.size());
    g.bias.resize(net.layers.size());
    Matrix delta = output_grad;  // dL/d(post-dropout activation) of current layer
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const auto& layer = net.layers[li];
        if (cache.dropout[li].size() != 0) delta.array() *= cache.dropout[li].array();
        const auto& a = cache.activations[li];
        switch (layer.activation) {
            case Activation::identity: break;
            case Activation::relu: delta.array() *= (a.array() > 0.0).cast<double>(); break;
            case Activation::sigmoid: delta.array() *= a.array() * (1.0 - a.array()); break;
        }
        g.weights[li] = delta * cache.inputs[li].transpose();
        if (layer.masked()) g.weights[li].array() *= layer.mask.array();
        g.bias[li] = delta.rowwise().sum();
        if (li > 0) delta = layer.effective_weights().transpose() * delta;
    }
    return g;
}

inline void scale(Gradients& g, double factor) {
    for (auto& w : g.weights) w *= factor;
    for (auto& b : g.bias) b *= factor;
}

struct LossResult {
    double value = 0.0;
    Matrix grad;  // dLoss/dPrediction, same shape as the prediction
};

/// Sum over samples (columns) and bits of the Bernoulli negative log-likelihood
/// -x log p - (1-x) log(1-p), with p clamped to [eps, 1-eps]. Optional
/// non-negative per-sample weights multiply both loss and gradient.
inline LossResult bce_loss(const Matrix& pred, const Matrix& target, std::span<const double> weights = {}) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw Error("shape", "bce shape mismatch");
    if (!weights.empty() && weights.size() != static_cast<std::size_t>(pred.cols())) {
        throw Error("shape", "one weight per sample required");
    }
    LossResult r;
    r.grad.resize(pred.rows(), pred.cols());
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
        const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(c)];
        if (w < 0.0) throw Error("domain", "negative sample weight");
        double col_loss = 0.0;
        for (Eigen::Index i = 0; i < pred.rows(); ++i) {
            const double p = std::clamp(pred(i, c), kProbEpsilon, 1.0 - kProbEpsilon);
            const double x = target(i, c);
            col_loss += -x * std::log(p) - (1.0 - x) * std::log(1.0 - p);
            r.grad(i, c) = w * (p - x) / (p * (1.0 - p));
        }
        r.value += w * col_loss;
    }
    return r;
}

/// Per-tuple weighted cross-entropy: w * bce_loss.
inline LossResult weighted_bce_loss(const Matrix& pred, const Matrix& target, double weight) {
    if (weight < 0.0) throw Error("domain", "negative sample weight");
    std::vector<double> w(static_cast<std::size_t>(pred.cols()), weight);
    return bce_loss(pred, target, w);
}

inline LossResult mse_loss(const Matrix& pred, const Matrix& target, std::span<const double> weights = {}) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw Error("shape", "mse shape mismatch");
    if (!weights.empty() && weights.size() != static_cast<std::size_t>(pred.cols())) {
        throw Error("shape", "one weight per sample required");
    }
    LossResult r;
    r.grad.resize(pred.rows(), pred.cols());
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
        const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(c)];
        for (Eigen::Index i = 0; i < pred.rows(); ++i) {
            const double d = pred(i, c) - target(i, c);
            r.value += w * d * d;
            r.grad(i, c) = 2.0 * w * d;
        }
    }
    return r;
}

enum class QErrorForm {
    max,  ///< max(s/s_hat, s_hat/s)
    sum,  ///< s/s_hat + s_hat/s
};

struct QErrorTerm {
    double value = 0.0;
    double grad = 0.0;  // d value / d scaled prediction
};

/// q-error of one scaled prediction against a true selectivity, differentiated
/// through the inverse selectivity transform. Estimates below `floor` are
/// clamped (zero gradient there); the kink s_hat == s takes subgradient 0.
inline QErrorTerm qerror_term(double scaled_pred, double truth, const SelTransform& transform, double floor,
                              QErrorForm form = QErrorForm::max) {
    if (!(truth > 0.0)) throw Error("domain", "q-error loss needs a positive true selectivity");
    const double raw = transform.inverse(scaled_pred);
    const bool clamped = raw < floor || raw > 1.0;
    const double est = std::clamp(raw, floor, 1.0);
    const double under = truth / est;
    const double over = est / truth;
    QErrorTerm t;
    double d_est = 0.0;
    if (form == QErrorForm::sum) {
        t.value = under + over;
        d_est = -truth / (est * est) + 1.0 / truth;
    } else {
        t.value = std::max(under, over);
        if (under > over) {
            d_est = -truth / (est * est);
        } else if (over > under) {
            d_est = 1.0 / truth;
        }
    }
    t.grad = clamped ? 0.0 : d_est * transform.inverse_derivative(scaled_pred);
    return t;
}

/// Weighted sum of q-error terms over a 1 x batch prediction row.
inline LossResult qerror_loss(const Matrix& pred, std::span<const double> truth, const SelTransform& transform,
                              double floor, std::span<const double> weights = {},
                              QErrorForm form = QErrorForm::max) {
    if (pred.rows() != 1 || static_cast<std::size_t>(pred.cols()) != truth.size()) {
        throw Error("shape", "q-error loss needs a scalar-output network");
    }
    LossResult r;
    r.grad.resize(1, pred.cols());
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
        const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(c)];
        const auto term = qerror_term(pred(0, c), truth[static_cast<std::size_t>(c)], transform, floor, form);
        r.value += w * term.value;
        r.grad(0, c) = w * term.grad;
    }
    return r;
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<Matrix> m_weights, v_weights;
    std::vector<Vector> m_bias, v_bias;

    static AdamState for_network(const Network& net, AdamConfig config) {
        AdamState s;
        s.config = config;
        for (const auto& l : net.layers) {
            s.m_weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
            s.v_weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
            s.m_bias.push_back(Vector::Zero(l.bias.size()));
            s.v_bias.push_back(Vector::Zero(l.bias.size()));
        }
        return s;
    }
};

namespace detail {
template <typename P>
void adam_update(P& param, const P& grad, P& m, P& v, const AdamConfig& c, double bc1, double bc2) {
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
    param.array() -= c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
}
}  // namespace detail

/// Bias-corrected Adam update.
inline void adam_step(Network& net, const Gradients& grads, AdamState& state) {
    if (grads.weights.size() != net.layers.size() || state.m_weights.size() != net.layers.size()) {
        throw Error("shape", "gradient/optimizer state does not match network");
    }
    ++state.step;
    const auto& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        detail::adam_update(net.layers[l].weights, grads.weights[l], state.m_weights[l], state.v_weights[l], c, bc1, bc2);
        detail::adam_update(net.layers[l].bias, grads.bias[l], state.m_bias[l], state.v_bias[l], c, bc1, bc2);
    }
}

}  // namespace selest::nn
