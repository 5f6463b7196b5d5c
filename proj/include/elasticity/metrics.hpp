#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "elasticity/core.hpp"
#include "elasticity/estimators.hpp"
#include "elasticity/scenario.hpp"

namespace elasticity {

struct MetricReport {
    double generalization_error = kNaN;
    double roc_auc = kNaN;
    double reconstruction_error = kNaN;
    double oracle_generalization_error = kNaN;
};

/// Sum of squared prediction residuals on held-out data.
inline double generalization_error(const Vector& alpha_hat, const Dataset& val) {
    if (alpha_hat.size() != val.n_consumers())
        throw DimensionMismatch("generalization_error: coefficient count does not match dataset");
    return (val.response - predict(alpha_hat, val.prices)).squaredNorm();
}

/// Probability that a random active consumer outscores a random inactive one,
/// ties counted as one half. Computed from mid-ranks in O(N log N).
inline double roc_auc(const Vector& scores, const std::vector<bool>& active_mask) {
    const auto n = static_cast<std::size_t>(scores.size());
    if (active_mask.size() != n)
        throw DimensionMismatch("roc_auc: scores and mask differ in length");
    const auto n_pos = static_cast<std::size_t>(std::count(active_mask.begin(), active_mask.end(), true));
    const auto n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw UndefinedAuc("roc_auc: needs at least one active and one inactive consumer");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b));
    });

    // Twice the rank sum keeps everything in integers until the final division.
    unsigned long long twice_rank_sum = 0;
    for (std::size_t lo = 0; lo < n;) {
        std::size_t hi = lo + 1;
        const double v = scores(static_cast<Eigen::Index>(order[lo]));
        while (hi < n && scores(static_cast<Eigen::Index>(order[hi])) == v) ++hi;
        const unsigned long long twice_mid_rank = (lo + 1) + hi;
        for (std::size_t k = lo; k < hi; ++k)
            if (active_mask[order[k]]) twice_rank_sum += twice_mid_rank;
        lo = hi;
    }
    const unsigned long long twice_u = twice_rank_sum - static_cast<unsigned long long>(n_pos) * (n_pos + 1);
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

inline double reconstruction_error(const Vector& alpha_hat, const Vector& alpha_star) {
    if (alpha_hat.size() != alpha_star.size())
        throw DimensionMismatch("reconstruction_error: length mismatch");
    return (alpha_hat - alpha_star).lpNorm<1>();
}

/// All four quantities for one fit. AUC is left NaN when the truth has a
/// single class.
inline MetricReport evaluate(const Vector& alpha_hat, const Dataset& val, const GroundTruth& truth) {
    MetricReport r;
    r.generalization_error = generalization_error(alpha_hat, val);
    r.oracle_generalization_error = generalization_error(truth.alpha_star, val);
    r.reconstruction_error = reconstruction_error(alpha_hat, truth.alpha_star);
    const auto n_pos = std::count(truth.active_mask.begin(), truth.active_mask.end(), true);
    if (n_pos > 0 && n_pos < static_cast<long>(truth.active_mask.size()))
        r.roc_auc = roc_auc(alpha_hat, truth.active_mask);
    return r;
}

} // namespace elasticity
