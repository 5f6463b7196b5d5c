#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "elasticity/core.hpp"

namespace elasticity {

struct SolverSettings {
    int max_iterations = 10000;
    /// Convergence threshold on the max absolute parameter change per sweep.
    double tolerance = 1e-8;
    /// Inclusion probabilities are kept in [m_clip, 1 - m_clip].
    double m_clip = 1e-12;
    /// Scale columns to unit mean square before fitting; coefficients are mapped back.
    bool standardize = false;
    /// Keep the objective after every sweep in FitResult::objective_trace.
    bool record_objective = false;

    void validate() const {
        if (max_iterations <= 0)
            throw InvalidArgument("solver: max_iterations must be positive");
        if (!(tolerance > 0.0))
            throw InvalidArgument("solver: tolerance must be positive");
        if (!(m_clip > 0.0 && m_clip < 0.5))
            throw InvalidArgument("solver: m_clip must lie in (0, 0.5)");
    }
};

struct FitResult {
    Vector alpha_hat;
    double hyperparameter = kNaN;
    std::optional<double> beta_hat;
    std::optional<Vector> m;
    std::optional<Vector> w;
    int iterations = 0;
    double final_objective = kNaN;
    bool converged = false;
    std::vector<double> objective_trace;

    long n_nonzero(double threshold = 1e-8) const {
        return static_cast<long>((alpha_hat.array().abs() > threshold).count());
    }
};

inline Vector predict(const Vector& alpha_hat, const Matrix& prices) {
    if (alpha_hat.size() != prices.cols())
        throw DimensionMismatch("predict: " + std::to_string(alpha_hat.size()) + " coefficients for " +
                                std::to_string(prices.cols()) + " consumers");
    return prices * alpha_hat;
}

namespace detail {

inline double soft_threshold(double z, double lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + e^x) without overflow.
inline double log1p_exp(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double binary_neg_entropy(double m) {
    double h = 0.0;
    if (m > 0.0) h += m * std::log(m);
    if (m < 1.0) h += (1.0 - m) * std::log1p(-m);
    return h;
}

// Column scales for optional standardization: sqrt(S_i / T).
inline Vector column_scales(const Matrix& prices) {
    Vector s = (prices.colwise().squaredNorm() / static_cast<double>(prices.rows())).cwiseSqrt().transpose();
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) == 0.0) s(i) = 1.0;
    return s;
}

template <typename Fit>
FitResult with_standardization(const Dataset& data, bool enabled, Fit&& fit) {
    if (!enabled) return fit(data);
    const Vector scale = column_scales(data.prices);
    Dataset scaled{data.prices * scale.cwiseInverse().asDiagonal(), data.response};
    FitResult r = fit(scaled);
    if (r.w) {
        *r.w = r.w->cwiseQuotient(scale);
        r.alpha_hat = r.m->cwiseProduct(*r.w);
    } else {
        r.alpha_hat = r.alpha_hat.cwiseQuotient(scale);
    }
    return r;
}

// Solves the SPD system, refusing near-singular matrices.
inline Vector spd_solve(const Matrix& a, const Vector& b, const char* who) {
    constexpr double kMinRcond = 1e-12;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success || !(llt.rcond() > kMinRcond))
        throw IllConditioned(std::string(who) + ": normal equations are singular or ill-conditioned");
    Vector x = llt.solve(b);
    // One step of iterative refinement tightens the normal-equation residual.
    x += llt.solve(b - a * x);
    return x;
}

} // namespace detail

/// Least squares via the normalized covariance system chi * alpha = b.
inline FitResult ols_fit(const Dataset& data) {
    data.validate();
    const double t = static_cast<double>(data.n_samples());
    if (data.n_samples() < data.n_consumers())
        throw IllConditioned("ols: fewer samples than consumers");
    const Matrix chi = data.prices.transpose() * data.prices / t;
    const Vector b = data.prices.transpose() * data.response / t;

    FitResult r;
    r.alpha_hat = detail::spd_solve(chi, b, "ols");
    r.final_objective = 0.5 * (data.response - data.prices * r.alpha_hat).squaredNorm();
    r.converged = true;
    return r;
}

/// Minimizes 1/2 ||P - rho alpha||^2 + lambda/2 ||alpha||^2 in closed form.
/// When T < N the dual system (rho rho^T + lambda I) is solved instead.
inline FitResult ridge_fit(const Dataset& data, double lambda, const SolverSettings& settings = {}) {
    data.validate();
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw InvalidArgument("ridge: lambda must be a finite non-negative real");
    if (data.n_samples() < 1)
        throw InvalidArgument("ridge: empty dataset");

    return detail::with_standardization(data, settings.standardize, [lambda](const Dataset& d) {
        const auto n = d.n_consumers();
        const auto t = d.n_samples();
        FitResult r;
        r.hyperparameter = lambda;
        if (lambda > 0.0 && t < n) {
            Matrix k = d.prices * d.prices.transpose();
            k.diagonal().array() += lambda;
            r.alpha_hat = d.prices.transpose() * detail::spd_solve(k, d.response, "ridge");
        } else {
            Matrix g = d.prices.transpose() * d.prices;
            g.diagonal().array() += lambda;
            r.alpha_hat = detail::spd_solve(g, d.prices.transpose() * d.response, "ridge");
        }
        r.final_objective = 0.5 * (d.response - d.prices * r.alpha_hat).squaredNorm() +
                            0.5 * lambda * r.alpha_hat.squaredNorm();
        r.converged = true;
        return r;
    });
}

inline double lasso_objective(const Dataset& data, const Vector& alpha, double lambda) {
    return 0.5 * (data.response - data.prices * alpha).squaredNorm() + lambda * alpha.lpNorm<1>();
}

/// Cyclic coordinate descent for 1/2 ||P - rho alpha||^2 + lambda ||alpha||_1.
///
/// Each pass over all coordinates is followed by passes restricted to the
/// current nonzero set until those settle; the fit is converged only when a
/// full pass moves no coefficient by more than the tolerance.
///
/// `warm_start`, when given, is the starting point in the caller's (unscaled)
/// coordinates; the minimizer does not depend on it.
inline FitResult lasso_fit(const Dataset& data, double lambda, const SolverSettings& settings = {},
                           const Vector* warm_start = nullptr) {
    data.validate();
    settings.validate();
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw InvalidArgument("lasso: lambda must be a finite positive real");
    if (warm_start && warm_start->size() != data.n_consumers())
        throw DimensionMismatch("lasso: warm start has the wrong length");

    return detail::with_standardization(data, settings.standardize, [&](const Dataset& d) {
        const auto n = d.n_consumers();
        const Vector col_sq = d.prices.colwise().squaredNorm().transpose();
        Vector alpha = Vector::Zero(n);
        if (warm_start) {
            alpha = *warm_start;
            if (settings.standardize) alpha = alpha.cwiseProduct(detail::column_scales(data.prices));
        }
        Vector resid = d.response - d.prices * alpha;

        auto update = [&](Eigen::Index i) {
            if (col_sq(i) == 0.0) return 0.0;
            const double z = d.prices.col(i).dot(resid) + col_sq(i) * alpha(i);
            const double next = detail::soft_threshold(z, lambda) / col_sq(i);
            const double delta = next - alpha(i);
            if (delta != 0.0) {
                resid.noalias() -= delta * d.prices.col(i);
                alpha(i) = next;
            }
            return std::abs(delta);
        };

        std::vector<Eigen::Index> active;

        // Slow coordinate descent near interpolation is cut short by a
        // feature-sign step on the current support S with signs s:
        //  - |S| > T: the loss is flat along null(X_S) while the penalty falls
        //    along the null-space part of -s; move that way until a coefficient
        //    reaches zero and drop it.
        //  - |S| <= T: solve the stationarity conditions exactly, moving only as
        //    far as the first sign change (that coordinate drops out).
        // Every step lowers the objective; the next full pass checks optimality
        // off the support.
        constexpr int kPolishEvery = 10;
        auto polish_on_support = [&]() -> bool {
            const auto t_rows = d.n_samples();
            while (true) {
                std::vector<Eigen::Index> support;
                for (const auto i : active)
                    if (alpha(i) != 0.0) support.push_back(i);
                const auto k = static_cast<Eigen::Index>(support.size());
                if (k == 0) return false;
                Matrix xa(t_rows, k);
                Vector sign(k), current(k);
                for (Eigen::Index j = 0; j < k; ++j) {
                    const auto i = support[static_cast<std::size_t>(j)];
                    xa.col(j) = d.prices.col(i);
                    current(j) = alpha(i);
                    sign(j) = alpha(i) > 0.0 ? 1.0 : -1.0;
                }

                Vector direction;
                if (k > t_rows) {
                    Eigen::LLT<Matrix> llt(xa * xa.transpose());
                    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-10)) return false;
                    direction = xa.transpose() * llt.solve(xa * sign) - sign;
                    if (!(direction.norm() > 1e-9)) return false;
                } else {
                    Eigen::LLT<Matrix> llt(xa.transpose() * xa);
                    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-10)) return false;
                    direction = llt.solve(xa.transpose() * d.response - lambda * sign) - current;
                }

                // Largest step keeping every sign; a full step only in the solve case.
                double step = k > t_rows ? INFINITY : 1.0;
                Eigen::Index blocking = -1;
                for (Eigen::Index j = 0; j < k; ++j)
                    if (direction(j) * sign(j) < 0.0) {
                        const double to_zero = -current(j) / direction(j);
                        if (to_zero < step) {
                            step = to_zero;
                            blocking = j;
                        }
                    }
                if (!std::isfinite(step)) return false;
                for (Eigen::Index j = 0; j < k; ++j)
                    alpha(support[static_cast<std::size_t>(j)]) = current(j) + step * direction(j);
                if (blocking >= 0) alpha(support[static_cast<std::size_t>(blocking)]) = 0.0;
                resid = d.response - d.prices * alpha;
                if (blocking < 0) return true;
            }
        };

        FitResult r;
        r.hyperparameter = lambda;
        int sweeps = 0;
        while (sweeps < settings.max_iterations) {
            double max_delta = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                max_delta = std::max(max_delta, update(i));
            ++sweeps;
            if (settings.record_objective) r.objective_trace.push_back(lasso_objective(d, alpha, lambda));
            if (max_delta < settings.tolerance) {
                r.converged = true;
                break;
            }

            active.clear();
            for (Eigen::Index i = 0; i < n; ++i)
                if (alpha(i) != 0.0) active.push_back(i);
            for (int inner_sweeps = 1; sweeps < settings.max_iterations; ++inner_sweeps) {
                double inner = 0.0;
                for (const auto i : active)
                    inner = std::max(inner, update(i));
                ++sweeps;
                if (settings.record_objective) r.objective_trace.push_back(lasso_objective(d, alpha, lambda));
                if (inner < settings.tolerance) break;
                if (inner_sweeps % kPolishEvery == 0 && polish_on_support()) break;
            }
        }

        r.alpha_hat = alpha;
        r.iterations = sweeps;
        r.final_objective = lasso_objective(d, alpha, lambda);
        return r;
    });
}

/// Largest |rho_i^T P|: the smallest lambda at which the lasso solution is zero.
inline double lasso_lambda_max(const Dataset& data) {
    return (data.prices.transpose() * data.response).cwiseAbs().maxCoeff();
}

namespace detail {

// Free energy from precomputed pieces: residual energy ||r||^2 and the
// variance term sum m(1-m) w^2 S.
inline double vg_free_energy_parts(double resid_sq, double variance_term, const Vector& m, double beta,
                                   double gamma, Eigen::Index t) {
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    const double log_norm = log1p_exp(gamma);
    double prior_entropy = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i)
        prior_entropy += -(gamma * m(i) - log_norm) + binary_neg_entropy(m(i));
    return 0.5 * beta * (resid_sq + variance_term) - 0.5 * static_cast<double>(t) * std::log(beta / kTwoPi) +
           prior_entropy;
}

inline double vg_variance_term(const Vector& m, const Vector& w, const Vector& col_sq) {
    return (m.array() * (1.0 - m.array()) * w.array().square() * col_sq.array()).sum();
}

} // namespace detail

/// Negative log of the factorized variational bound for the spike-and-slab
/// model, with switches s_i ~ Bernoulli(m_i) gating weights w_i.
inline double vg_free_energy(const Dataset& data, const Vector& m, const Vector& w, double beta, double gamma) {
    data.validate();
    const auto n = data.n_consumers();
    if (m.size() != n || w.size() != n)
        throw DimensionMismatch("vg_free_energy: m and w must have one entry per consumer");
    if (!m.allFinite() || !w.allFinite() || !std::isfinite(beta) || !std::isfinite(gamma))
        throw InvalidArgument("vg_free_energy: non-finite input");
    if (!(beta > 0.0))
        throw InvalidArgument("vg_free_energy: beta must be positive");
    if ((m.array() < 0.0).any() || (m.array() > 1.0).any())
        throw InvalidArgument("vg_free_energy: m must lie in [0, 1]");

    const Vector col_sq = data.prices.colwise().squaredNorm().transpose();
    const double resid_sq = (data.response - data.prices * m.cwiseProduct(w)).squaredNorm();
    return detail::vg_free_energy_parts(resid_sq, detail::vg_variance_term(m, w, col_sq), m, beta, gamma,
                                        data.n_samples());
}

/// Variational garrote: coordinate-wise fixed point of the free energy.
///
/// Per coordinate, with c_i the correlation of column i with the residual
/// excluding i:
///   w_i = c_i / S_i,   m_i = sigmoid(gamma + beta c_i^2 / (2 S_i))
/// and after every sweep beta = T / (||r||^2 + sum m(1-m) w^2 S). Each step is
/// an exact block minimization, so the free energy never increases.
struct VgState {
    Vector m;
    Vector w;
    double beta = kNaN;
};

inline FitResult vg_fit(const Dataset& data, double gamma, const SolverSettings& settings = {},
                        const VgState* warm_start = nullptr) {
    data.validate();
    settings.validate();
    if (!std::isfinite(gamma))
        throw InvalidArgument("vg: gamma must be finite");
    if (data.n_samples() < 1)
        throw InvalidArgument("vg: empty dataset");

    return detail::with_standardization(data, settings.standardize, [&](const Dataset& d) {
        const auto n = d.n_consumers();
        const auto t = d.n_samples();
        const Vector col_sq = d.prices.colwise().squaredNorm().transpose();
        if ((col_sq.array() <= 0.0).any())
            throw InvalidArgument("vg: every price column needs nonzero energy");
        const double response_sq = d.response.squaredNorm();
        if (!(response_sq > 0.0))
            throw NumericalFailure("vg: zero response leaves the noise precision unbounded");

        const double lo = settings.m_clip;
        const double hi = 1.0 - settings.m_clip;
        Vector m = Vector::Constant(n, 0.5);
        Vector w = Vector::Zero(n);
        double beta = static_cast<double>(t) / response_sq;
        if (warm_start) {
            m = warm_start->m.cwiseMax(lo).cwiseMin(hi);
            w = warm_start->w;
            beta = warm_start->beta;
        }
        Vector resid = d.response - d.prices * m.cwiseProduct(w);

        FitResult r;
        r.hyperparameter = gamma;
        double energy = kNaN;
        int sweep = 0;
        while (sweep < settings.max_iterations) {
            double max_delta = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double s = col_sq(i);
                const double old_alpha = m(i) * w(i);
                const double c = d.prices.col(i).dot(resid) + old_alpha * s;
                const double w_next = c / s;
                const double m_next = std::clamp(detail::sigmoid(gamma + beta * c * c / (2.0 * s)), lo, hi);
                const double delta_alpha = m_next * w_next - old_alpha;
                if (delta_alpha != 0.0) resid.noalias() -= delta_alpha * d.prices.col(i);
                max_delta = std::max({max_delta, std::abs(m_next - m(i)), std::abs(w_next - w(i))});
                m(i) = m_next;
                w(i) = w_next;
            }
            ++sweep;

            const double variance = detail::vg_variance_term(m, w, col_sq);
            const double resid_sq = resid.squaredNorm();
            beta = static_cast<double>(t) / (resid_sq + variance);
            energy = detail::vg_free_energy_parts(resid_sq, variance, m, beta, gamma, t);
            if (!std::isfinite(energy) || !std::isfinite(beta))
                throw NumericalFailure("vg: free energy diverged at sweep " + std::to_string(sweep));
            if (settings.record_objective) r.objective_trace.push_back(energy);
            if (max_delta < settings.tolerance) {
                r.converged = true;
                break;
            }
        }

        r.alpha_hat = m.cwiseProduct(w);
        r.beta_hat = beta;
        r.m = std::move(m);
        r.w = std::move(w);
        r.iterations = sweep;
        r.final_objective = vg_free_energy(d, *r.m, *r.w, beta, gamma);
        return r;
    });
}

} // namespace elasticity
