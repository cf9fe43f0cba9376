#pragma once

#include <stdexcept>
#include <string>

namespace aggrisk {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// argument outside the mathematical domain (alpha outside (0,1), p < 1, ...)
struct DomainError : Error {
    using Error::Error;
};

// quantity not defined for this input (infinite mean, measure/approach mismatch)
struct UnsupportedError : Error {
    using Error::Error;
};

struct InvalidPiError : Error {
    using Error::Error;
};

// the robust model does not exist (set not bounded in the requested order)
struct UnboundedError : Error {
    using Error::Error;
};

struct InfeasibleError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw DomainError(msg);
}

} // namespace aggrisk
