#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fracweak {

/// Argument outside the mathematical domain of an operation (t outside [0,1], a < 0, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Inconsistent configuration: kappa > n, incompatible scheme pairs, unsupported oracle requests.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Covariance factorization failed even at the largest jitter on the ladder.
class FactorizationError : public std::runtime_error {
public:
    FactorizationError(const std::string& what, std::size_t minor_index)
        : std::runtime_error(what), minor_index_(minor_index) {}

    /// Zero-based index of the leading minor that stopped being positive.
    std::size_t minor_index() const noexcept { return minor_index_; }

private:
    std::size_t minor_index_;
};

/// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
class AccuracyError : public std::runtime_error {
public:
    AccuracyError(const std::string& what, double best_value, double best_error)
        : std::runtime_error(what), best_value_(best_value), best_error_(best_error) {}

    double best_value() const noexcept { return best_value_; }
    double best_error() const noexcept { return best_error_; }

private:
    double best_value_;
    double best_error_;
};

/// Too many Monte Carlo paths produced non-finite integrals.
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(const std::string& what, std::size_t bad_paths, std::size_t total_paths)
        : std::runtime_error(what), bad_paths_(bad_paths), total_paths_(total_paths) {}

    std::size_t bad_paths() const noexcept { return bad_paths_; }
    std::size_t total_paths() const noexcept { return total_paths_; }

private:
    std::size_t bad_paths_;
    std::size_t total_paths_;
};

/// A rate fit was asked for with fewer than three usable ladder points.
class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fracweak
