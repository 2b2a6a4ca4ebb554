#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fieldsel {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input: bad site references, non-finite couplings, wrong configuration shape.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Field too large for exhaustive enumeration.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Operation requires a model family the given model does not belong to.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

class EmptyCollectionError : public Error {
public:
    using Error::Error;
};

// Penalty path shows no complexity drop, so no minimal constant can be read off it.
class NoJumpError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::string source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what),
          source_(std::move(source)),
          line_(line) {}

    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string source_;
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace fieldsel
