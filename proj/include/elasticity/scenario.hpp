#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <variant>
#include <vector>

#include "elasticity/core.hpp"

namespace elasticity {

/// Noise given directly as the standard deviation of the aggregate noise.
struct SigmaP {
    double value = 1.0;
};

/// Noise given as log10(signal sd / noise sd).
struct TargetSnr {
    double log10_ratio = 0.0;
};

using NoiseSpec = std::variant<SigmaP, TargetSnr>;

struct ScenarioConfig {
    long n_consumers = 0;
    long n_samples = 0;
    double active_fraction = 0.0;
    double elasticity_value = 1.0;
    NoiseSpec noise = SigmaP{1.0};
    double baseline_total = 0.0;
    std::uint64_t seed = 0;

    long n_active() const { return std::lround(active_fraction * static_cast<double>(n_consumers)); }
    long n_validation() const { return n_samples / 2; }

    void validate() const {
        if (n_consumers <= 0 || n_samples <= 0)
            throw InvalidArgument("scenario: dimensions must be positive");
        if (!(active_fraction >= 0.0 && active_fraction <= 1.0))
            throw InvalidArgument("scenario: active_fraction must lie in [0, 1]");
        if (!std::isfinite(elasticity_value) || !std::isfinite(baseline_total))
            throw InvalidArgument("scenario: non-finite elasticity or baseline");
        if (const auto* s = std::get_if<SigmaP>(&noise)) {
            // sigma_p = 0 is accepted for noiseless sanity runs.
            if (!(s->value >= 0.0) || !std::isfinite(s->value))
                throw InvalidArgument("scenario: sigma_p must be a non-negative real");
        } else {
            const auto& snr = std::get<TargetSnr>(noise);
            if (!std::isfinite(snr.log10_ratio))
                throw InvalidArgument("scenario: target SNR must be finite");
            if (n_active() < 1 || elasticity_value == 0.0)
                throw InvalidArgument("scenario: SNR target requested for a zero signal");
        }
    }
};

struct GroundTruth {
    Vector alpha_star;
    std::vector<bool> active_mask;
    double sigma_p = 0.0;
    double signal_sd = 0.0;
};

struct Scenario {
    Dataset train;
    Dataset val;
    GroundTruth truth;
};

/// Standard deviation of alpha*^T rho(t) for unit-normal prices.
inline double analytic_signal_sd(double elasticity_value, long n_active) {
    return std::abs(elasticity_value) * std::sqrt(static_cast<double>(n_active));
}

inline double snr_to_sigma(double signal_sd, double target_snr) {
    if (!(signal_sd > 0.0))
        throw InvalidArgument("snr_to_sigma: signal_sd must be positive");
    return signal_sd / std::pow(10.0, target_snr);
}

namespace detail {

inline Dataset draw_dataset(long rows, const Vector& alpha_star, double sigma_p, double baseline,
                            std::uint64_t stream_seed) {
    std::mt19937_64 rng(stream_seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    const auto n = alpha_star.size();

    Dataset d;
    d.prices.resize(rows, n);
    // Column-major fill order keeps each consumer's series contiguous in the stream.
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index t = 0; t < rows; ++t)
            d.prices(t, j) = unit(rng);

    d.response = d.prices * alpha_star;
    for (Eigen::Index t = 0; t < rows; ++t)
        d.response(t) += baseline + sigma_p * unit(rng);
    return d;
}

} // namespace detail

/// Draws the training set, a validation set of floor(T/2) rows and the ground
/// truth. Output is a pure function of the config (including its seed).
inline Scenario generate_scenario(const ScenarioConfig& config) {
    config.validate();
    const long n = config.n_consumers;
    const long k = config.n_active();

    Scenario out;
    out.truth.alpha_star = Vector::Zero(n);
    out.truth.active_mask.assign(static_cast<std::size_t>(n), false);

    std::mt19937_64 select_rng(mix64(config.seed, 0));
    std::vector<long> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0L);
    // Partial Fisher-Yates: the first k entries are a uniform random k-subset.
    for (long i = 0; i < k; ++i) {
        std::uniform_int_distribution<long> pick(i, n - 1);
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(select_rng))]);
    }
    for (long i = 0; i < k; ++i) {
        const long idx = order[static_cast<std::size_t>(i)];
        out.truth.alpha_star(idx) = config.elasticity_value;
        out.truth.active_mask[static_cast<std::size_t>(idx)] = true;
    }

    out.truth.signal_sd = analytic_signal_sd(config.elasticity_value, k);
    if (const auto* s = std::get_if<SigmaP>(&config.noise))
        out.truth.sigma_p = s->value;
    else
        out.truth.sigma_p = snr_to_sigma(out.truth.signal_sd, std::get<TargetSnr>(config.noise).log10_ratio);

    out.train = detail::draw_dataset(config.n_samples, out.truth.alpha_star, out.truth.sigma_p,
                                     config.baseline_total, mix64(config.seed, 1));
    out.val = detail::draw_dataset(config.n_validation(), out.truth.alpha_star, out.truth.sigma_p,
                                   config.baseline_total, mix64(config.seed, 2));
    return out;
}

/// Removes the price-insensitive aggregate from the response before fitting.
inline Dataset remove_baseline(Dataset data, double baseline_total) {
    data.response.array() -= baseline_total;
    return data;
}

} // namespace elasticity
