#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "proda/bench_data.hpp"
#include "proda/metrics.hpp"

using namespace proda;

namespace {

DomainSpec two_gaussians(std::vector<double> translation) {
    DomainSpec s;
    s.family = DomainFamily::Gaussian;
    s.class_count = 2;
    s.dim = 2;
    s.means = {{-2.0, 0.0}, {2.0, 0.0}};
    s.stds = {0.7, 0.7};
    s.translation = std::move(translation);
    s.class_freqs = {0.5, 0.5};
    s.n_source = 5000;
    s.n_target = 5000;
    s.seed = 11;
    return s;
}

// The Bayes rule for two equal isotropic Gaussians at (+-2, 0) on the source.
double bayes_rule_accuracy(const Tensor2D& x, const Labels& y) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) ok += (x(i, 0) > 0.0 ? 1 : 0) == y[i];
    return static_cast<double>(ok) / static_cast<double>(x.rows());
}

} // namespace

TEST(Generate, Deterministic) {
    const DomainSpec s = domain_preset("gauss-shift");
    DomainData a = generate(s), b = generate(s);
    EXPECT_EQ(a.source.x, b.source.x);
    EXPECT_EQ(a.source.y, b.source.y);
    EXPECT_EQ(a.target, b.target);
    EXPECT_EQ(metrics::ground_truth(a.target_truth), metrics::ground_truth(b.target_truth));
    DomainSpec other = s;
    other.seed += 1;
    EXPECT_NE(generate(other).source.x, a.source.x);
}

TEST(Generate, IdentityShiftKeepsAccuracy) {
    DomainData d = generate(two_gaussians({}));
    const double src = bayes_rule_accuracy(d.source.x, d.source.y);
    const double tgt = bayes_rule_accuracy(d.target, metrics::ground_truth(d.target_truth));
    EXPECT_NEAR(src, tgt, 0.01);
}

TEST(Generate, TranslationAlongClassAxisDropsAccuracy) {
    DomainData d = generate(two_gaussians({1.5, 0.0}));
    const double src = bayes_rule_accuracy(d.source.x, d.source.y);
    const double tgt = bayes_rule_accuracy(d.target, metrics::ground_truth(d.target_truth));
    EXPECT_GT(src - tgt, 0.10);
}

TEST(Generate, TranslationAcrossClassAxisKeepsAccuracy) {
    // A shift parallel to the decision boundary changes nothing for this rule.
    DomainData d = generate(two_gaussians({0.0, 1.5}));
    const double src = bayes_rule_accuracy(d.source.x, d.source.y);
    const double tgt = bayes_rule_accuracy(d.target, metrics::ground_truth(d.target_truth));
    EXPECT_NEAR(src, tgt, 0.01);
}

TEST(Generate, ClassFrequenciesWithinBinomialBand) {
    DomainSpec s = two_gaussians({});
    s.class_freqs = {0.9, 0.1};
    s.n_source = 2000;
    DomainData d = generate(s);
    const double n = 2000.0;
    const auto minority = static_cast<double>(std::count(d.source.y.begin(), d.source.y.end(), 1));
    EXPECT_LT(std::abs(minority - 0.1 * n), 3.0 * std::sqrt(n * 0.1 * 0.9));
}

TEST(Generate, PresetsValidate) {
    EXPECT_NO_THROW(domain_preset("gauss-shift").validate());
    EXPECT_NO_THROW(domain_preset("moons-shift").validate());
    EXPECT_THROW(domain_preset("nope"), std::invalid_argument);
    DomainSpec bad = two_gaussians({1.0});
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Generate, ApplyShiftRotatesAboutPivot) {
    DomainSpec s = two_gaussians({1.0, 0.0});
    s.rotation_deg = 90.0;
    s.pivot = {1.0, 1.0};
    Tensor2D y = apply_shift(s, Tensor2D{{2.0, 1.0}});
    EXPECT_NEAR(y(0, 0), 2.0, 1e-12);
    EXPECT_NEAR(y(0, 1), 2.0, 1e-12);
}

class BoundaryNoise : public ::testing::Test {
protected:
    void SetUp() override {
        data = generate(two_gaussians({}));
        data.source.x = data.source.x.gather_rows(first(1000));
        data.source.y.resize(1000);
    }
    static std::vector<std::size_t> first(std::size_t n) {
        std::vector<std::size_t> v(n);
        std::iota(v.begin(), v.end(), 0);
        return v;
    }
    DomainData data;
    Network model{NetworkShape{2, {4}, 3, 2}, 3};
};

TEST_F(BoundaryNoise, ZeroRateIsIdentity) {
    EXPECT_EQ(inject_boundary_noise(data.source.y, data.source.x, model, 0.0), data.source.y);
}

TEST_F(BoundaryNoise, FlipsExactlyTheSmallestMargins) {
    Labels noisy = inject_boundary_noise(data.source.y, data.source.x, model, 0.2);
    std::vector<std::size_t> flipped;
    for (std::size_t i = 0; i < noisy.size(); ++i)
        if (noisy[i] != data.source.y[i]) flipped.push_back(i);
    ASSERT_EQ(flipped.size(), 200u);

    const Tensor2D p = model.forward(data.source.x).probs;
    std::vector<std::pair<double, std::size_t>> margins;
    for (std::size_t i = 0; i < p.rows(); ++i) margins.emplace_back(std::abs(p(i, 0) - p(i, 1)), i);
    std::sort(margins.begin(), margins.end());
    std::vector<std::size_t> expected;
    for (std::size_t j = 0; j < 200; ++j) expected.push_back(margins[j].second);
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(flipped, expected);
}

TEST_F(BoundaryNoise, RejectsBadRate) {
    EXPECT_THROW(inject_boundary_noise(data.source.y, data.source.x, model, 1.0), std::invalid_argument);
}

TEST(Dataset, ExportImportRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "proda_bench_roundtrip";
    std::filesystem::remove_all(dir);
    DomainSpec s = domain_preset("moons-shift");
    s.n_source = 50;
    s.n_target = 40;
    DomainData d = generate(s);
    export_dataset(dir, d);
    DomainData back = import_dataset(dir);
    EXPECT_EQ(back.source.x, d.source.x);
    EXPECT_EQ(back.source.y, d.source.y);
    EXPECT_EQ(back.target, d.target);
    EXPECT_EQ(metrics::ground_truth(back.target_truth), metrics::ground_truth(d.target_truth));
    EXPECT_EQ(back.spec.name, s.name);
    EXPECT_EQ(back.spec.rotation_deg, s.rotation_deg);
    std::filesystem::remove_all(dir);
}
