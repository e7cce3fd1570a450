#pragma once

#include <stdexcept>
#include <string>

namespace ipaint {

// Error categories map onto CLI exit codes: usage=1, data=2, numeric=3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad flags, malformed config values, contradictory options.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error(msg) {}
};

// Missing/corrupt files, shape mismatches, unmatched datasets.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Non-finite losses, failed convergence, numeric contract violations.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace ipaint
