#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "proda/errors.hpp"
#include "proda/losses.hpp"
#include "proda/structure.hpp"

using namespace proda;

namespace {

std::vector<std::size_t> iota_ids(std::size_t n) {
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

AugmentConfig identity_augment() {
    AugmentConfig a;
    a.weak_jitter_std = 0.0;
    a.strong_jitter_std = 0.0;
    a.strong_drop_prob = 0.0;
    a.strong_scale_lo = 1.0;
    a.strong_scale_hi = 1.0;
    return a;
}

PrototypeBank line_bank() {
    PrototypeBank bank(2, 1, 0.5);
    bank.assign({Tensor2D{{-1.0}, {1.0}}, {1, 1}});
    return bank;
}

} // namespace

TEST(Augment, IdentitySettings) {
    std::mt19937_64 rng(1);
    Tensor2D x = oracle::random_tensor(rng, 7, 3, -2, 2);
    const auto ids = iota_ids(7);
    EXPECT_EQ(augment(x, ids, identity_augment(), AugmentMode::Weak, {3, 4}), x);
    EXPECT_EQ(augment(x, ids, identity_augment(), AugmentMode::Strong, {3, 4}), x);
}

TEST(Augment, WeakJitterScale) {
    AugmentConfig a;
    a.weak_jitter_std = 0.1;
    const std::size_t n = 10000, dim = 2;
    Tensor2D x(n, dim, 0.0);
    Tensor2D y = augment(x, iota_ids(n), a, AugmentMode::Weak, {7, 0});
    double sq = 0.0;
    for (double v : y.values()) sq += v * v;
    const double rms = std::sqrt(sq / static_cast<double>(n));
    EXPECT_NEAR(rms, 0.1 * std::sqrt(static_cast<double>(dim)), 0.05 * 0.1 * std::sqrt(2.0));
}

TEST(Augment, DropAllGivesZeros) {
    AugmentConfig a;
    a.strong_drop_prob = 1.0;
    std::mt19937_64 rng(2);
    Tensor2D y = augment(oracle::random_tensor(rng, 5, 4, 1, 2), iota_ids(5), a, AugmentMode::Strong, {1, 1});
    for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Augment, IndependentOfBatchOrder) {
    AugmentConfig a;
    std::mt19937_64 rng(3);
    Tensor2D x = oracle::random_tensor(rng, 4, 2, -1, 1);
    const std::vector<std::size_t> ids{10, 11, 12, 13};
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    std::vector<std::size_t> perm_ids;
    for (auto p : perm) perm_ids.push_back(ids[p]);
    Tensor2D full = augment(x, ids, a, AugmentMode::Strong, {9, 5});
    Tensor2D shuffled = augment(x.gather_rows(perm), perm_ids, a, AugmentMode::Strong, {9, 5});
    EXPECT_EQ(shuffled, full.gather_rows(perm));
    EXPECT_NE(augment(x, ids, a, AugmentMode::Strong, {9, 6}), full);
}

TEST(Augment, RowIdCountMismatch) {
    EXPECT_THROW(augment(Tensor2D(3, 2), iota_ids(2), AugmentConfig{}, AugmentMode::Weak, {}), DimensionError);
}

TEST(Augment, Validate) {
    AugmentConfig a;
    EXPECT_NO_THROW(a.validate());
    a.strong_jitter_std = 0.01;
    EXPECT_THROW(a.validate(), std::invalid_argument);
    a = AugmentConfig{};
    a.strong_drop_prob = 1.5;
    EXPECT_THROW(a.validate(), std::invalid_argument);
    a = AugmentConfig{};
    a.strong_scale_lo = 2.0;
    EXPECT_THROW(a.validate(), std::invalid_argument);
}

TEST(SoftAssignment, Examples) {
    PrototypeBank bank(3, 2, 0.5);
    bank.assign({Tensor2D{{0, 0}, {10, 0}, {0, 10}}, {1, 1, 1}});
    Tensor2D z = soft_assignment(Tensor2D{{0, 0}}, bank, 1.0);
    EXPECT_GT(z(0, 0), 0.9999);

    PrototypeBank sym(3, 2, 0.5);
    sym.assign({Tensor2D{{1, 0}, {-0.5, std::sqrt(0.75)}, {-0.5, -std::sqrt(0.75)}}, {1, 1, 1}});
    Tensor2D e = soft_assignment(Tensor2D{{0, 0}}, sym, 1.0);
    for (double v : e.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-12);

    PrototypeBank line(3, 1, 0.5);
    line.assign({Tensor2D{{0}, {1}, {2}}, {1, 1, 1}});
    Tensor2D w = soft_assignment(Tensor2D{{0}}, line, 1.0);
    EXPECT_NEAR(w(0, 0), 0.66524, 1e-5);
    EXPECT_NEAR(w(0, 1), 0.24473, 1e-5);
    EXPECT_NEAR(w(0, 2), 0.09003, 1e-5);
}

TEST(SoftAssignment, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        PrototypeBank bank(4, 3, 0.5);
        bank.assign({oracle::random_tensor(rng, 4, 3, -1, 1), {1, 1, 1, 1}});
        Tensor2D f = oracle::random_tensor(rng, 5, 3, -1, 1);
        Tensor2D weak = softmax_rows(oracle::random_tensor(rng, 5, 4, -2, 2));
        const double tau = 0.5 + 0.1 * trial;
        auto value = [&] { return kl_consistency(weak, soft_assignment(f, bank, tau)).value; };
        const LossResult kl = kl_consistency(weak, soft_assignment(f, bank, tau));
        Tensor2D g = soft_assignment_backward(f, bank, tau, kl.grad);
        EXPECT_LT(oracle::relative_error(g.values(), oracle::numeric_gradient(value, f.values())), 1e-6);
    }
}

TEST(Consistency, IdenticalViewsGiveZeroLoss) {
    NetworkShape shape{2, {6}, 3, 2};
    Network net(shape, 5);
    EmaEncoder ema(net, 0.9);
    std::mt19937_64 rng(5);
    Tensor2D x = oracle::random_tensor(rng, 6, 2, -1, 1);
    PrototypeBank bank = init_prototypes(net.features(x), {0, 1, 0, 1, 0, 1}, 2, 0.5);
    auto out = consistency_step(x, iota_ids(6), {1, 0}, net, ema, bank, identity_augment(), 1.0);
    EXPECT_NEAR(out.loss, 0.0, 1e-15);
    for (double v : out.grad_features.values()) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(Consistency, GradientPullsTowardWeakAssignment) {
    PrototypeBank bank = line_bank();
    Tensor2D weak_f{{-1.0}};
    Tensor2D strong_f{{0.5}};
    const LossResult kl = kl_consistency(soft_assignment(weak_f, bank, 1.0), soft_assignment(strong_f, bank, 1.0));
    EXPECT_GT(kl.value, 0.0);
    Tensor2D g = soft_assignment_backward(strong_f, bank, 1.0, kl.grad);
    // A descent step moves the strong feature towards class 0 at -1.
    EXPECT_GT(g(0, 0), 0.0);
    auto value = [&] {
        return kl_consistency(soft_assignment(weak_f, bank, 1.0), soft_assignment(strong_f, bank, 1.0)).value;
    };
    EXPECT_NEAR(g(0, 0), oracle::numeric_gradient(value, strong_f.values())[0], 1e-8);
}

TEST(Consistency, ParameterGradientsMatchFiniteDifferences) {
    NetworkShape shape{2, {5}, 3, 3};
    Network net(shape, 6);
    std::mt19937_64 rng(6);
    Tensor2D strong = oracle::random_tensor(rng, 6, 2, -1, 1);
    PrototypeBank bank(3, 3, 0.5);
    bank.assign({oracle::random_tensor(rng, 3, 3, -0.5, 0.5), {1, 1, 1}});
    Tensor2D weak_f = oracle::random_tensor(rng, 6, 3, -0.5, 0.5);
    auto out = consistency_from_views(weak_f, strong, net, bank, 1.0);
    Gradients g = net.backward(out.trace, Tensor2D{}, out.grad_features);
    auto numeric = oracle::numeric_param_gradient(
        net, [&](const Network& n) { return consistency_from_views(weak_f, strong, n, bank, 1.0).loss; });
    EXPECT_LT(oracle::relative_error(oracle::flatten(g), numeric), 1e-6);
}

TEST(Consistency, NoSeenClassThrows) {
    NetworkShape shape{2, {}, 2, 2};
    Network net(shape, 1);
    EmaEncoder ema(net, 0.5);
    PrototypeBank bank(2, 2, 0.5);
    EXPECT_THROW(consistency_step(Tensor2D{{0, 0}}, iota_ids(1), {}, net, ema, bank, AugmentConfig{}, 1.0),
                 StateError);
}
