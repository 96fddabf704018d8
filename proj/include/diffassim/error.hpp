#pragma once

#include <stdexcept>
#include <string>

namespace diffassim {

// Error classes map one-to-one onto CLI exit codes: usage 1, format 2,
// numerical 3.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments, shapes or configuration.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated or mismatched files.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, blow-ups and divergence.
class NumericalError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw UsageError(msg);
}

}  // namespace diffassim
