#pragma once

#include <stdexcept>
#include <string>

namespace egosynth {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad arguments, or inputs that violate a documented precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents; line is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg, int line = 0)
        : Error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Singular or otherwise geometrically unusable input.
class DegeneracyError : public Error {
public:
    using Error::Error;
};

/// A synthesis iterate went non-finite.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, long iteration)
        : Error(msg + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}
    long iteration() const { return iteration_; }

private:
    long iteration_;
};

}  // namespace egosynth
