#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvst {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user input: out-of-domain arguments, mismatched shapes, malformed files.
// The CLI maps these to exit code 1.

class DomainError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    ValidationError(const std::string& what, std::size_t line)
        : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Numerical failures during evaluation or fitting. The CLI maps these to exit code 2.

class NumericalError : public Error {
public:
    using Error::Error;
};

class NumericalRangeError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NotPositiveDefiniteError : public NumericalError {
public:
    explicit NotPositiveDefiniteError(std::size_t pivot)
        : NumericalError("matrix is not positive definite: pivot " + std::to_string(pivot) +
                         " (0-based) is not positive"),
          pivot_(pivot) {}

    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

class DegenerateScatterError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A component's effective count dropped below the identifiable minimum.
class DegenerateClusterError : public NumericalError {
public:
    DegenerateClusterError(std::size_t component, double effective_count, double required)
        : NumericalError("component " + std::to_string(component + 1) + " is degenerate: effective count " +
                         std::to_string(effective_count) + " < " + std::to_string(required) +
                         "; rerun with a different --seed"),
          component_(component) {}

    std::size_t component() const noexcept { return component_; }

private:
    std::size_t component_;
};

class NonFiniteLikelihoodError : public NumericalError {
public:
    explicit NonFiniteLikelihoodError(int iteration)
        : NumericalError("log-likelihood became non-finite at iteration " + std::to_string(iteration)),
          iteration_(iteration) {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

}  // namespace mvst
