#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "elasticity/core.hpp"
#include "elasticity/estimators.hpp"
#include "elasticity/metrics.hpp"

namespace elasticity {

enum class Method { ols, ridge, lasso, vg };

inline std::string_view to_string(Method m) {
    switch (m) {
    case Method::ols: return "ols";
    case Method::ridge: return "ridge";
    case Method::lasso: return "lasso";
    case Method::vg: return "vg";
    }
    return "?";
}

inline Method parse_method(std::string_view s) {
    if (s == "ols") return Method::ols;
    if (s == "ridge") return Method::ridge;
    if (s == "lasso") return Method::lasso;
    if (s == "vg" || s == "l0") return Method::vg;
    throw InvalidArgument("unknown method '" + std::string(s) + "'");
}

enum class GridScale { log_spaced, linear };

struct Grid {
    std::vector<double> values;
    GridScale scale = GridScale::linear;

    void validate() const {
        if (values.empty()) throw InvalidArgument("grid: empty");
        for (std::size_t i = 1; i < values.size(); ++i)
            if (!(values[i] > values[i - 1]))
                throw InvalidArgument("grid: values must be strictly increasing");
    }

    static Grid linear(double lo, double hi, int count) {
        Grid g{{}, GridScale::linear};
        if (count == 1) return Grid{{hi}, GridScale::linear};
        for (int k = 0; k < count; ++k)
            g.values.push_back(lo + (hi - lo) * k / (count - 1));
        g.values.back() = hi;
        return g;
    }

    static Grid log_spaced(double lo, double hi, int count) {
        Grid g = linear(std::log(lo), std::log(hi), count);
        for (auto& v : g.values) v = std::exp(v);
        g.values.front() = lo;
        g.values.back() = hi;
        g.scale = GridScale::log_spaced;
        return g;
    }
};

inline constexpr int kPenaltyGridSize = 50;
inline constexpr double kPenaltyGridSpan = 1e-4;
inline constexpr int kGammaGridSize = 25;
inline constexpr double kGammaMin = -20.0;
inline constexpr double kGammaMax = 0.0;

/// Candidate hyperparameters. Ridge and lasso share the lasso path range
/// [1e-4 lambda_max, lambda_max]; the garrote scans gamma in [-20, 0].
inline Grid default_grid(Method method, const Dataset& data) {
    if (data.n_samples() == 0) throw InvalidArgument("default_grid: empty dataset");
    switch (method) {
    case Method::ols:
        return Grid{{0.0}, GridScale::linear};
    case Method::ridge:
    case Method::lasso: {
        const double lmax = lasso_lambda_max(data);
        if (!(lmax > 0.0)) return Grid{{1.0}, GridScale::log_spaced};
        return Grid::log_spaced(kPenaltyGridSpan * lmax, lmax, kPenaltyGridSize);
    }
    case Method::vg:
        return Grid::linear(kGammaMin, kGammaMax, kGammaGridSize);
    }
    throw InvalidArgument("default_grid: unknown method");
}

inline FitResult fit(Method method, const Dataset& train, double hyper, const SolverSettings& settings) {
    switch (method) {
    case Method::ols: return ols_fit(train);
    case Method::ridge: return ridge_fit(train, hyper, settings);
    case Method::lasso: return lasso_fit(train, hyper, settings);
    case Method::vg: return vg_fit(train, hyper, settings);
    }
    throw InvalidArgument("fit: unknown method");
}

struct SelectionEntry {
    double hyperparameter;
    double validation_error;
};

struct Selection {
    FitResult best;
    double best_hyper = kNaN;
    double best_validation_error = kNaN;
    std::vector<SelectionEntry> table;
    std::vector<std::string> failures;
};

/// Fits every grid value on train and keeps the one with the lowest
/// validation error. Ties go to fewer nonzeros, then to the stronger penalty
/// (larger lambda, smaller gamma). Failed grid points are skipped.
inline Selection select(Method method, const Dataset& train, const Dataset& val, const Grid& grid,
                        const SolverSettings& settings = {}) {
    grid.validate();
    train.validate();
    val.validate();
    if (train.n_consumers() != val.n_consumers())
        throw DimensionMismatch("select: train and validation differ in consumer count");

    const bool larger_is_stronger = method != Method::vg;
    const std::size_t count = grid.values.size();
    std::vector<std::optional<FitResult>> fits(count);
    std::vector<std::string> errors(count);

    auto attempt = [&](std::size_t k, const Vector* warm) {
        try {
            fits[k] = method == Method::lasso ? lasso_fit(train, grid.values[k], settings, warm)
                                              : fit(method, train, grid.values[k], settings);
        } catch (const Error& e) {
            errors[k] = e.what();
        }
    };
    if (method == Method::lasso) {
        // Walk the path from the strongest penalty down, warm-starting each fit.
        const Vector* warm = nullptr;
        for (std::size_t k = count; k-- > 0;) {
            attempt(k, warm);
            if (fits[k]) warm = &fits[k]->alpha_hat;
        }
    } else {
        for (std::size_t k = 0; k < count; ++k) attempt(k, nullptr);
    }

    Selection out;
    std::optional<long> best_nnz;
    for (std::size_t k = 0; k < count; ++k) {
        const double h = grid.values[k];
        const std::string label = std::string(to_string(method)) + " @ " + std::to_string(h) + ": ";
        if (!fits[k]) {
            out.failures.push_back(label + errors[k]);
            continue;
        }
        FitResult& r = *fits[k];
        const double err = generalization_error(r.alpha_hat, val);
        if (!std::isfinite(err)) {
            out.failures.push_back(label + "non-finite validation error");
            continue;
        }
        out.table.push_back({h, err});
        const long nnz = r.n_nonzero();
        bool take = !best_nnz.has_value() || err < out.best_validation_error;
        if (!take && err == out.best_validation_error) {
            if (nnz != *best_nnz)
                take = nnz < *best_nnz;
            else
                take = larger_is_stronger ? h > out.best_hyper : h < out.best_hyper;
        }
        if (take) {
            out.best = std::move(r);
            out.best_hyper = method == Method::ols ? kNaN : h;
            out.best_validation_error = err;
            best_nnz = nnz;
        }
    }
    if (!best_nnz) {
        std::string msg = "select: every grid point failed for " + std::string(to_string(method));
        if (!out.failures.empty()) msg += " (" + out.failures.front() + ")";
        throw NumericalFailure(msg);
    }
    return out;
}

} // namespace elasticity
