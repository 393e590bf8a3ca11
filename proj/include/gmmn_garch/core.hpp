#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmmn_garch {

/// Observations in rows, components in columns.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Bad input data or arguments (exit code 2 at the CLI).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid configuration; reported like an input error.
class ConfigError : public InputError {
public:
    using InputError::InputError;
};

/// A numerical procedure could not produce a usable result (exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input that makes a statistical procedure undefined (constant series, zero spectrum).
class DegenerateInputError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InputError(message);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace gmmn_garch
