#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace elasticity {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Normal equations too close to singular to solve reliably.
class IllConditioned : public Error {
public:
    using Error::Error;
};

/// An iterative solver produced a non-finite objective.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

/// AUC requested with only one class present.
class UndefinedAuc : public Error {
public:
    using Error::Error;
};

/// Price perturbations (rows = time slots, columns = consumers) and the
/// aggregate consumption change observed in each slot.
struct Dataset {
    Matrix prices;
    Vector response;

    Eigen::Index n_samples() const { return prices.rows(); }
    Eigen::Index n_consumers() const { return prices.cols(); }

    void validate() const {
        if (response.size() != prices.rows())
            throw DimensionMismatch("dataset: response length " + std::to_string(response.size()) +
                                    " != price rows " + std::to_string(prices.rows()));
        if (!prices.allFinite() || !response.allFinite())
            throw InvalidArgument("dataset: non-finite entries");
    }
};

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) { return mix64(mix64(a) ^ b); }

} // namespace elasticity
