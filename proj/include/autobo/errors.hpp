#ifndef AUTOBO_ERRORS_HPP
#define AUTOBO_ERRORS_HPP
#pragma once

#include <stdexcept>
#include <string>

namespace autobo {

/// Bad shapes, out-of-range arguments, invalid configuration.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Cholesky failure after the jitter ladder is exhausted.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every hyperparameter restart failed numerically.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// API misuse, e.g. a Hedge policy evaluated without its state.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// An objective could not produce a value for a point.
class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The external objective child violated the line protocol.
class ProtocolError : public EvaluationError {
public:
    using EvaluationError::EvaluationError;
};

} // namespace autobo

#endif // AUTOBO_ERRORS_HPP
