#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mhist {

/// Malformed template, histogram, model or index text.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    explicit ParseError(const std::string& what) : std::runtime_error(what), line_(0) {}

    /// 1-based line of the offending input, 0 when not line oriented.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Raised when a template has fewer than two minutiae for histogram construction.
class PairFeaturesUndefined : public std::invalid_argument {
public:
    PairFeaturesUndefined() : std::invalid_argument("pair features undefined") {}
};

/// One of the two classes is missing from a training split.
class ClassEmpty : public std::runtime_error {
public:
    explicit ClassEmpty(const std::string& what) : std::runtime_error("class empty: " + what) {}
};

/// Persisted model or index could not be decoded.
class ModelFormatError : public std::runtime_error {
public:
    explicit ModelFormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mhist
