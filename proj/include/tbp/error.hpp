#pragma once

#include <stdexcept>
#include <string>

namespace tbp {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptySequence : public Error {
public:
    EmptySequence() : Error("empty point sequence") {}
};

class ZeroNorm : public Error {
public:
    ZeroNorm() : Error("context sequence has zero norm; cosine undefined") {}
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line), detail_(what) {}
    std::size_t line() const { return line_; }
    const std::string& detail() const { return detail_; }

private:
    std::size_t line_;
    std::string detail_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace tbp
