#include <algorithm>

#include <gtest/gtest.h>

#include "elasticity/metrics.hpp"
#include "elasticity/selection.hpp"
#include "oracles.hpp"

using namespace elasticity;

namespace {

Scenario small_scenario(std::uint64_t seed, double sigma = 1.0, long n = 40, long t = 30) {
    ScenarioConfig c;
    c.n_consumers = n;
    c.n_samples = t;
    c.active_fraction = 0.2;
    c.noise = SigmaP{sigma};
    c.seed = seed;
    return generate_scenario(c);
}

} // namespace

TEST(Selection, MethodNamesRoundTrip) {
    for (const auto m : {Method::ols, Method::ridge, Method::lasso, Method::vg})
        EXPECT_EQ(parse_method(to_string(m)), m);
    EXPECT_EQ(parse_method("l0"), Method::vg);
    EXPECT_THROW(parse_method("elastic"), InvalidArgument);
}

TEST(Selection, DefaultGrids) {
    const auto s = small_scenario(1);
    const double lmax = lasso_lambda_max(s.train);
    const Grid lasso = default_grid(Method::lasso, s.train);
    ASSERT_EQ(lasso.values.size(), 50u);
    EXPECT_DOUBLE_EQ(lasso.values.back(), lmax);
    EXPECT_DOUBLE_EQ(lasso.values.front(), 1e-4 * lmax);
    const Grid vg = default_grid(Method::vg, s.train);
    ASSERT_EQ(vg.values.size(), 25u);
    EXPECT_EQ(vg.values.front(), -20.0);
    EXPECT_EQ(vg.values.back(), 0.0);
    EXPECT_EQ(default_grid(Method::ols, s.train).values.size(), 1u);
}

TEST(Selection, GridValidation) {
    EXPECT_THROW(Grid{}.validate(), InvalidArgument);
    EXPECT_THROW((Grid{{1.0, 1.0}, GridScale::linear}.validate()), InvalidArgument);
}

TEST(Selection, SingleValueGridEqualsDirectFit) {
    const auto s = small_scenario(2);
    const auto sel = select(Method::ridge, s.train, s.val, Grid{{0.5}, GridScale::linear});
    EXPECT_EQ(sel.best_hyper, 0.5);
    EXPECT_TRUE(sel.best.alpha_hat == ridge_fit(s.train, 0.5).alpha_hat);
    ASSERT_EQ(sel.table.size(), 1u);
    EXPECT_EQ(sel.table[0].validation_error, generalization_error(sel.best.alpha_hat, s.val));
}

TEST(Selection, BestIsTableMinimum) {
    for (const auto m : {Method::ridge, Method::lasso, Method::vg}) {
        const auto s = small_scenario(3);
        const auto sel = select(m, s.train, s.val, default_grid(m, s.train));
        double lowest = INFINITY;
        for (const auto& e : sel.table) lowest = std::min(lowest, e.validation_error);
        EXPECT_EQ(sel.best_validation_error, lowest);
        EXPECT_EQ(generalization_error(sel.best.alpha_hat, s.val), lowest);
    }
}

TEST(Selection, IsDeterministic) {
    const auto s = small_scenario(4);
    for (const auto m : {Method::ridge, Method::lasso, Method::vg}) {
        const auto a = select(m, s.train, s.val, default_grid(m, s.train));
        const auto b = select(m, s.train, s.val, default_grid(m, s.train));
        EXPECT_TRUE(a.best.alpha_hat == b.best.alpha_hat);
        EXPECT_EQ(a.best_hyper, b.best_hyper);
    }
}

TEST(Selection, TiesGoToStrongerPenalty) {
    const auto s = small_scenario(5);
    const double lmax = lasso_lambda_max(s.train);
    const Grid g{{2.0 * lmax, 3.0 * lmax, 4.0 * lmax}, GridScale::log_spaced};
    const auto sel = select(Method::lasso, s.train, s.val, g);
    EXPECT_EQ(sel.best_hyper, 4.0 * lmax);
    EXPECT_EQ(sel.best.n_nonzero(), 0);
}

TEST(Selection, NoiselessLassoPredictsValidationAlmostExactly) {
    const auto s = small_scenario(6, 0.0, 20, 60);
    const auto sel = select(Method::lasso, s.train, s.val, default_grid(Method::lasso, s.train));
    EXPECT_LT(sel.best_validation_error, 1e-6 * s.val.response.squaredNorm());
}

TEST(Selection, FailedGridPointsAreSkipped) {
    const auto s = small_scenario(7);
    const auto sel = select(Method::ridge, s.train, s.val, Grid{{0.0, 1.0}, GridScale::linear});
    EXPECT_EQ(sel.best_hyper, 1.0);
    EXPECT_EQ(sel.failures.size(), 1u);
    EXPECT_THROW(select(Method::ridge, s.train, s.val, Grid{{0.0}, GridScale::linear}), NumericalFailure);
}

TEST(Selection, OlsReportsNoHyperparameter) {
    const auto s = small_scenario(8, 1.0, 10, 40);
    const auto sel = select(Method::ols, s.train, s.val, default_grid(Method::ols, s.train));
    EXPECT_TRUE(std::isnan(sel.best_hyper));
}

TEST(Selection, MismatchedDatasetsThrow) {
    const auto a = small_scenario(9);
    const auto b = small_scenario(9, 1.0, 41);
    EXPECT_THROW(select(Method::ridge, a.train, b.val, Grid{{1.0}, GridScale::linear}), DimensionMismatch);
}

TEST(Selection, GarroteGammaIsInteriorOnSparseProblems) {
    int interior = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ScenarioConfig c;
        c.n_consumers = 500;
        c.n_samples = 250;
        c.active_fraction = 0.1;
        c.seed = 9000 + seed;
        const auto s = generate_scenario(c);
        const auto sel = select(Method::vg, s.train, s.val, default_grid(Method::vg, s.train));
        if (sel.best_hyper > kGammaMin && sel.best_hyper < kGammaMax) ++interior;
    }
    EXPECT_GE(interior, 8);
}
