#pragma once

#include <stdexcept>
#include <string>

namespace albumen {

/// Base for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A parameter is outside its documented range (negative sigma, even kernel, ...).
class InvalidParameterError : public Error {
public:
    using Error::Error;
};

/// An input tensor violates a precondition (shape, channel count, finiteness).
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// Missing checkpoints, unmet stage dependencies, bad config keys.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// Unreadable files, mismatched evaluation sets, dataset problems.
class DataError : public Error {
public:
    using Error::Error;
};

/// A degradation operation failed; carries the op kind.
class DegradationOpError : public Error {
public:
    DegradationOpError(const std::string& kind, const std::string& msg)
        : Error(kind + ": " + msg), kind_(kind) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

/// A scratch/paper texture does not fit the target image after placement.
class InvalidPlacementError : public Error {
public:
    using Error::Error;
};

/// Metric is undefined for the given data (e.g. single-class AUC).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

/// Reference (brute-force) routines refuse inputs above their cost guard.
class SizeGuardError : public Error {
public:
    using Error::Error;
};

}  // namespace albumen
