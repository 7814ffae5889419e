#pragma once

#include <stdexcept>
#include <string>

/// @file error.hpp
/// @brief Exception types thrown by the library.

namespace trimap {

/// Base class of every error raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function (x <= 0 for log_t, NaN input, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Mismatched vector or matrix dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid tunable (k >= N, fraction outside range, t_prime < 1, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Non-finite values produced during optimization.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
public:
    using Error::Error;
};

/// File system failure.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace trimap
