#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "elasticity/scenario.hpp"

using namespace elasticity;

namespace {

ScenarioConfig base_config() {
    ScenarioConfig c;
    c.n_consumers = 500;
    c.n_samples = 250;
    c.active_fraction = 0.1;
    c.noise = SigmaP{1.0};
    c.seed = 42;
    return c;
}

double sample_sd(const Vector& v) {
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

} // namespace

TEST(Scenario, ActiveSetHasExpectedSizeAndValues) {
    const auto s = generate_scenario(base_config());
    EXPECT_EQ(std::count(s.truth.active_mask.begin(), s.truth.active_mask.end(), true), 50);
    for (long i = 0; i < 500; ++i) {
        const bool active = s.truth.active_mask[static_cast<std::size_t>(i)];
        EXPECT_EQ(s.truth.alpha_star(i), active ? 1.0 : 0.0);
    }
    EXPECT_EQ(s.train.prices.rows(), 250);
    EXPECT_EQ(s.train.prices.cols(), 500);
    EXPECT_EQ(s.val.prices.rows(), 125);
    EXPECT_EQ(s.train.response.size(), 250);
}

TEST(Scenario, NoActiveConsumersGivesZeroTruth) {
    auto c = base_config();
    c.active_fraction = 0.0;
    const auto s = generate_scenario(c);
    EXPECT_EQ(s.truth.alpha_star.cwiseAbs().sum(), 0.0);
}

TEST(Scenario, SameSeedIsBitIdentical) {
    const auto a = generate_scenario(base_config());
    const auto b = generate_scenario(base_config());
    EXPECT_TRUE(a.train.prices == b.train.prices);
    EXPECT_TRUE(a.train.response == b.train.response);
    EXPECT_TRUE(a.val.prices == b.val.prices);
    EXPECT_TRUE(a.truth.alpha_star == b.truth.alpha_star);
}

TEST(Scenario, DifferentSeedsDifferInPricesAndActiveSet) {
    auto c = base_config();
    const auto a = generate_scenario(c);
    c.seed = 43;
    const auto b = generate_scenario(c);
    EXPECT_FALSE(a.train.prices == b.train.prices);
    EXPECT_FALSE(a.truth.active_mask == b.truth.active_mask);
}

TEST(Scenario, TrainingAndValidationStreamsAreDistinct) {
    auto c = base_config();
    c.n_samples = 20;
    const auto s = generate_scenario(c);
    EXPECT_FALSE(s.train.prices.topRows(10) == s.val.prices);
}

TEST(Scenario, SignalStandardDeviationMatchesAnalyticValue) {
    auto c = base_config();
    c.n_samples = 100000;
    c.noise = SigmaP{0.0};
    const auto s = generate_scenario(c);
    const double expected = analytic_signal_sd(1.0, 50);
    EXPECT_NEAR(expected, std::sqrt(50.0), 1e-12);
    EXPECT_NEAR(sample_sd(s.train.response), expected, 0.02 * expected);
}

TEST(Scenario, PriceColumnsAreUncorrelated) {
    ScenarioConfig c;
    c.n_consumers = 10;
    c.n_samples = 10000;
    c.active_fraction = 0.5;
    c.seed = 7;
    const auto s = generate_scenario(c);
    const Matrix& x = s.train.prices;
    const double t = static_cast<double>(x.rows());
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const Matrix cov = centered.transpose() * centered / (t - 1.0);
    for (long i = 0; i < 10; ++i)
        for (long j = 0; j < 10; ++j)
            if (i != j) {
                EXPECT_LT(std::abs(cov(i, j)), 5.0 / std::sqrt(t));
            }
}

TEST(Scenario, NoiseMatchesRequestedSigma) {
    ScenarioConfig c;
    c.n_consumers = 3;
    c.n_samples = 100000;
    c.active_fraction = 0.0;
    c.noise = SigmaP{2.5};
    c.seed = 11;
    const auto s = generate_scenario(c);
    EXPECT_NEAR(sample_sd(s.train.response), 2.5, 0.02 * 2.5);
}

TEST(Scenario, SnrTargetSetsNoiseLevel) {
    auto c = base_config();
    c.noise = TargetSnr{1.0};
    const auto s = generate_scenario(c);
    EXPECT_NEAR(s.truth.sigma_p, std::sqrt(50.0) / 10.0, 1e-12);
    EXPECT_NEAR(snr_to_sigma(2.0, 0.0), 2.0, 1e-15);
}

TEST(Scenario, BaselineShiftsResponseAndCanBeRemoved) {
    auto c = base_config();
    const auto plain = generate_scenario(c);
    c.baseline_total = 100.0;
    const auto shifted = generate_scenario(c);
    const Dataset restored = remove_baseline(shifted.train, 100.0);
    EXPECT_LT((restored.response - plain.train.response).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Scenario, InvalidConfigurationsThrow) {
    auto c = base_config();
    c.active_fraction = 1.5;
    EXPECT_THROW(generate_scenario(c), InvalidArgument);
    c = base_config();
    c.n_consumers = 0;
    EXPECT_THROW(generate_scenario(c), InvalidArgument);
    c = base_config();
    c.noise = SigmaP{-1.0};
    EXPECT_THROW(generate_scenario(c), InvalidArgument);
    c = base_config();
    c.active_fraction = 0.0;
    c.noise = TargetSnr{0.0};
    EXPECT_THROW(generate_scenario(c), InvalidArgument);
}
