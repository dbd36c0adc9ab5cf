#pragma once

#include <stdexcept>
#include <string>

namespace msvg {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, dimensions, identifiers).
class DataError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Overflow, non-finite values or failed factorizations during computation.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// File system failures.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace msvg
