#pragma once

#include <stdexcept>
#include <string>

namespace mrdac {

// Base for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or length mismatch between operands.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error("dimension error: " + msg) {}
};

// Non-finite values, empty inputs, out-of-range parameters.
class InvalidInputError : public Error {
public:
    explicit InvalidInputError(const std::string& msg) : Error("invalid input: " + msg) {}
};

// Malformed bitstream. Message carries the offending offset or record.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

class UnsupportedVersionError : public ParseError {
public:
    explicit UnsupportedVersionError(const std::string& msg)
        : ParseError("unsupported version: " + msg) {}
};

// RD curves with disjoint quality ranges.
class NoOverlapError : public Error {
public:
    explicit NoOverlapError(const std::string& msg) : Error("no quality overlap: " + msg) {}
};

// Training loss became non-finite. Message names the step.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& msg) : Error("divergence: " + msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};

}  // namespace mrdac
