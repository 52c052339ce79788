#pragma once

#include <stdexcept>
#include <string>

namespace mkv {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Grid construction or precondition violation (dims, point counts, bounds).
class InvalidGridError : public Error {
public:
    using Error::Error;
};

/// Two fields that must live on the same grid (or same spacing) do not.
class IncompatibleGridsError : public Error {
public:
    using Error::Error;
};

/// Marginalization axis set empty or out of range.
class InvalidAxesError : public Error {
public:
    using Error::Error;
};

/// Interpolation point outside the grid box.
class OutOfDomainError : public Error {
public:
    using Error::Error;
};

/// A field that must be L2-normalized is not.
class NormalizationError : public Error {
public:
    using Error::Error;
};

/// Iterative solver ran out of iterations; carries the last residual.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& msg, double last_residual)
        : Error(msg), last_residual(last_residual) {}
    double last_residual;
};

/// Requested problem too large or too coarse; carries a suggestion.
class ResolutionError : public Error {
public:
    ResolutionError(const std::string& msg, int suggested_points_per_axis)
        : Error(msg), suggested_points_per_axis(suggested_points_per_axis) {}
    int suggested_points_per_axis;
};

/// Radial profile handed to the QV validator is not usable.
class InvalidProfileError : public Error {
public:
    using Error::Error;
};

/// Wasserstein bound exponents violate p < k.
class InvalidExponentError : public Error {
public:
    using Error::Error;
};

/// Two internal computation paths that must agree do not.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// SDE paths blowing up faster than the discard budget allows.
class InstabilityError : public Error {
public:
    using Error::Error;
};

/// Scenario file syntax or schema violation; carries a line number when known.
class ScenarioError : public Error {
public:
    explicit ScenarioError(const std::string& msg, int line = -1)
        : Error(line >= 0 ? "line " + std::to_string(line) + ": " + msg : msg),
          line(line) {}
    int line;
};

/// Filesystem failures, with the offending path in the message.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace mkv
