#pragma once

#include <stdexcept>
#include <string>

namespace proda {

/// Shapes of two operands do not agree.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// An operation was invoked on an object that is not in a usable state
/// (no recorded forward pass, write-once store written twice, no seen prototype, ...).
class StateError : public std::logic_error {
public:
    explicit StateError(const std::string& what) : std::logic_error(what) {}
};

/// Malformed config, CSV or checkpoint input.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Training produced a non-finite loss or a degenerate state and was aborted.
class TrainingAborted : public std::runtime_error {
public:
    explicit TrainingAborted(const std::string& what) : std::runtime_error(what) {}
};

} // namespace proda
