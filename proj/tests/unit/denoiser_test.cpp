#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "proda/denoiser.hpp"
#include "proda/errors.hpp"

using namespace proda;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST(HardLabel, ArgmaxTiesAndThreshold) {
    EXPECT_EQ(hard_label(Tensor2D{{0.2, 0.5, 0.3}}), Labels{1});
    EXPECT_EQ(hard_label(Tensor2D{{0.5, 0.5}}), Labels{0});
    EXPECT_EQ(hard_label(Tensor2D{{0.6, 0.4}}, 0.95), Labels{kIgnore});
    EXPECT_EQ(hard_label(Tensor2D{{0.96, 0.04}}, 0.95), Labels{0});
}

TEST(PrototypeSoftmax, PublishedTemperatureExample) {
    Tensor2D w = prototype_softmax(Tensor2D{{0, 1, 2}}, 1.0);
    EXPECT_NEAR(w(0, 0), 0.66524, 1e-5);
    EXPECT_NEAR(w(0, 1), 0.24473, 1e-5);
    EXPECT_NEAR(w(0, 2), 0.09003, 1e-5);
}

TEST(PrototypeSoftmax, EqualDistancesUniform) {
    Tensor2D w = modulation_weights(Tensor2D{{2, 2, 2, 2}}, 1.0);
    for (double v : w.values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(PrototypeSoftmax, SmallTemperatureApproachesNearest) {
    Tensor2D w = prototype_softmax(Tensor2D{{0, 1}}, 0.01);
    EXPECT_EQ(w(0, 0), 1.0);
    EXPECT_LT(w(0, 1), 1e-40);
}

TEST(PrototypeSoftmax, UnseenGetZeroWeight) {
    Tensor2D w = prototype_softmax(Tensor2D{{kInf, 1, 1}}, 1.0);
    EXPECT_EQ(w(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(w(0, 1), 0.5);
}

TEST(PrototypeSoftmax, Errors) {
    EXPECT_THROW(prototype_softmax(Tensor2D{{kInf, kInf}}, 1.0), StateError);
    EXPECT_THROW(prototype_softmax(Tensor2D{{1, 2}}, 0.0), std::invalid_argument);
}

TEST(PrototypeSoftmax, MatchesExtendedPrecisionOracle) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor2D d = oracle::random_tensor(rng, 3, 4, 0, 6);
        const double tau = 0.2 + 0.1 * trial;
        Tensor2D w = prototype_softmax(d, tau);
        Tensor2D ref = oracle::neg_distance_softmax(d, tau);
        for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(w.values()[i], ref.values()[i], 1e-12);
    }
}

TEST(Rectify, UniformOmegaKeepsArgmax) {
    Tensor2D base{{0.1, 0.7, 0.2}, {0.5, 0.2, 0.3}};
    EXPECT_EQ(rectify_labels(base, Tensor2D(2, 3, 1.0 / 3.0)), hard_label(base));
}

TEST(Rectify, WeightsFlipLabel) {
    EXPECT_EQ(rectify_labels(Tensor2D{{0.6, 0.4}}, Tensor2D{{0.3, 0.7}}), Labels{1});
    Tensor2D soft = weighted_labels(Tensor2D{{0.6, 0.4}}, Tensor2D{{0.3, 0.7}});
    EXPECT_NEAR(soft(0, 0), 0.18 / 0.46, 1e-15);
    EXPECT_NEAR(soft(0, 1), 0.28 / 0.46, 1e-15);
}

TEST(Rectify, OneHotBaseWins) {
    EXPECT_EQ(rectify_labels(Tensor2D{{0, 0, 1}}, Tensor2D{{0.9, 0.09, 0.01}}), Labels{2});
}

TEST(Rectify, ThresholdAppliesToRenormalisedProduct) {
    Tensor2D base{{0.6, 0.4}};
    Tensor2D omega{{0.3, 0.7}};
    // renormalised winner is 0.28 / 0.46 = 0.6087
    EXPECT_EQ(rectify_labels(base, omega, 0.6), Labels{1});
    EXPECT_EQ(rectify_labels(base, omega, 0.61), Labels{kIgnore});
}

TEST(Rectify, ZeroMassRowIgnored) {
    EXPECT_EQ(rectify_labels(Tensor2D{{1, 0}}, Tensor2D{{0, 1}}), Labels{kIgnore});
}

TEST(Rectify, ShapeMismatchThrows) {
    EXPECT_THROW(rectify_labels(Tensor2D(2, 3, 0.3), Tensor2D(2, 2, 0.5)), DimensionError);
}

TEST(Store, WriteOnceAndValidRows) {
    PseudoLabelStore store;
    EXPECT_FALSE(store.initialized());
    EXPECT_THROW(store.boilerplate(), StateError);
    EXPECT_THROW(store.set_boilerplate(Tensor2D{{0.5, 0.6}}), std::invalid_argument);
    store.set_boilerplate(Tensor2D{{0.25, 0.75}, {0.9, 0.1}});
    EXPECT_EQ(store.current(), (Labels{1, 0}));
    EXPECT_THROW(store.set_boilerplate(Tensor2D{{0.5, 0.5}}), StateError);
}

TEST(Store, RectifySubsetLeavesBoilerplate) {
    PseudoLabelStore store(Tensor2D{{0.6, 0.4}, {0.6, 0.4}, {0.6, 0.4}});
    const Tensor2D before = store.boilerplate();
    const std::vector<std::size_t> idx{1};
    store.rectify(idx, Tensor2D{{0.3, 0.7}});
    EXPECT_EQ(store.current(), (Labels{0, 1, 0}));
    EXPECT_EQ(store.boilerplate(), before);
    store.rectify_all(Tensor2D(3, 2, 0.5));
    EXPECT_EQ(store.current(), (Labels{0, 0, 0}));
}
