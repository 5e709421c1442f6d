#include <gtest/gtest.h>

#include <cmath>

#include "selest/neural.hpp"
#include "selest/transform.hpp"
#include "support/checks.hpp"

using namespace selest;
using nn::Matrix;

TEST(Gradients, MaskedDenseLayers) {
    auto r = checks::gradient_suite(0, 30, 101);
    EXPECT_LE(r.worst, 1e-4);
    EXPECT_TRUE(r.masks_respected);
}

TEST(Gradients, Bce) { EXPECT_LE(checks::gradient_suite(1, 25, 102).worst, 1e-4); }
TEST(Gradients, WeightedBce) { EXPECT_LE(checks::gradient_suite(2, 25, 103).worst, 1e-4); }
TEST(Gradients, Mse) { EXPECT_LE(checks::gradient_suite(3, 25, 104).worst, 1e-4); }
TEST(Gradients, QError) { EXPECT_LE(checks::gradient_suite(4, 25, 105).worst, 1e-4); }

TEST(Layer, MaskedOutEntriesHaveNoEffect) {
    Rng rng(5);
    auto net = checks::random_network(rng, true, nn::Activation::sigmoid);
    Matrix x = Matrix::Random(static_cast<Eigen::Index>(net.input_size()), 3);
    const Matrix before = nn::predict(net, x);
    for (auto& l : net.layers) {
        for (Eigen::Index i = 0; i < l.mask.size(); ++i) {
            if (l.mask.data()[i] == 0.0) l.weights.data()[i] += 7.0;
        }
    }
    EXPECT_EQ(nn::predict(net, x), before);
}

TEST(Loss, BceValues) {
    Matrix p(2, 1), t(2, 1);
    p << 0.5, 0.25;
    t << 1, 0;
    auto r = nn::bce_loss(p, t);
    EXPECT_NEAR(r.value, std::log(2.0) - std::log(0.75), 1e-12);
    // clamp keeps the loss finite at p = 0
    p << 0.0, 1.0;
    EXPECT_TRUE(std::isfinite(nn::bce_loss(p, t).value));
}

TEST(Loss, WeightedBceScalesLinearly) {
    Matrix p(1, 1), t(1, 1);
    p << 0.3;
    t << 1;
    EXPECT_NEAR(nn::weighted_bce_loss(p, t, 3.0).value, 3.0 * nn::bce_loss(p, t).value, 1e-12);
    EXPECT_EQ(nn::weighted_bce_loss(p, t, 0.0).value, 0.0);
    EXPECT_THROW(nn::weighted_bce_loss(p, t, -1.0), Error);
}

TEST(Loss, QErrorForms) {
    const SelTransform t{0.0, 4.0};
    const double truth = 0.01;
    const double scaled = t.forward(0.02);
    EXPECT_NEAR(nn::qerror_term(scaled, truth, t, 1e-9).value, 2.0, 1e-9);
    EXPECT_NEAR(nn::qerror_term(scaled, truth, t, 1e-9, nn::QErrorForm::sum).value, 2.5, 1e-9);
    EXPECT_EQ(nn::qerror_term(t.forward(truth), truth, t, 1e-9).grad, 0.0);
    EXPECT_THROW(nn::qerror_term(scaled, 0.0, t, 1e-9), Error);
}

TEST(Adam, MinimizesQuadratic) {
    Rng rng(1);
    std::vector<std::size_t> sizes{1, 1};
    std::vector<nn::Activation> acts{nn::Activation::identity};
    auto net = nn::Network::dense(sizes, acts, rng);
    auto adam = nn::AdamState::for_network(net, {0.05, 0.9, 0.999, 1e-8});
    Matrix x(1, 2), y(1, 2);
    x << 1, 2;
    y << 3, 5;  // y = 2x + 1
    for (int i = 0; i < 3000; ++i) {
        auto cache = nn::forward(net, x);
        auto loss = nn::mse_loss(cache.output(), y);
        nn::adam_step(net, nn::backward(net, cache, loss.grad), adam);
    }
    EXPECT_NEAR(net.layers[0].weights(0, 0), 2.0, 1e-3);
    EXPECT_NEAR(net.layers[0].bias(0), 1.0, 1e-3);
}

TEST(Init, GlorotRange) {
    Rng rng(2);
    std::vector<std::size_t> sizes{30, 20};
    std::vector<nn::Activation> acts{nn::Activation::relu};
    auto net = nn::Network::dense(sizes, acts, rng);
    const double limit = std::sqrt(6.0 / 50.0);
    EXPECT_LE(net.layers[0].weights.cwiseAbs().maxCoeff(), limit);
    EXPECT_GT(net.layers[0].weights.cwiseAbs().maxCoeff(), 0.8 * limit);
    EXPECT_EQ(net.layers[0].bias.squaredNorm(), 0.0);
    EXPECT_EQ(net.parameter_count(), 620u);
}

TEST(Dropout, RespectsEligibilityAndRescales) {
    Rng rng(3);
    Matrix a = Matrix::Ones(4, 2000);
    std::vector<bool> eligible{true, true, false, true};
    auto scale = nn::apply_dropout(a, 0.25, rng, eligible);
    EXPECT_EQ(a.row(2).minCoeff(), 1.0);
    EXPECT_NEAR(a.row(0).mean(), 1.0, 0.05);
    for (Eigen::Index c = 0; c < a.cols(); ++c) EXPECT_TRUE(scale(0, c) == 0.0 || std::abs(scale(0, c) - 4.0 / 3.0) < 1e-12);
    EXPECT_THROW(nn::apply_dropout(a, 1.0, rng), Error);
}

TEST(Shapes, MismatchIsAnError) {
    Rng rng(4);
    std::vector<std::size_t> sizes{3, 2};
    std::vector<nn::Activation> acts{nn::Activation::identity};
    auto net = nn::Network::dense(sizes, acts, rng);
    EXPECT_THROW(nn::predict(net, Matrix::Zero(2, 1)), Error);
    EXPECT_THROW(nn::bce_loss(Matrix::Zero(2, 1), Matrix::Zero(1, 2)), Error);
}
