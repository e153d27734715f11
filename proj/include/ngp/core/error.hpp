#pragma once

#include <stdexcept>
#include <string>

namespace ngp {

/// Base class for all library errors. `kind()` is a stable machine-readable tag
/// used by the CLI when reporting failures as JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& message) : Error("shape_mismatch", message) {}
};

class UnknownPrimitiveError : public Error {
public:
    explicit UnknownPrimitiveError(const std::string& name)
        : Error("unknown_primitive", "unknown primitive '" + name + "'") {}
};

class NonFiniteError : public Error {
public:
    explicit NonFiniteError(const std::string& message) : Error("non_finite", message) {}
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& message) : Error("invalid_argument", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io_error", message) {}
};

class MissingTermError : public Error {
public:
    explicit MissingTermError(const std::string& term) : Error("missing_term", "loss term '" + term + "' is missing") {}
};

class EmptyDatasetError : public Error {
public:
    explicit EmptyDatasetError(const std::string& message) : Error("empty_dataset", message) {}
};

} // namespace ngp
