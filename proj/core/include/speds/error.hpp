#pragma once

#include <stdexcept>
#include <string>

namespace speds {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A value violates an operation's precondition (bad index, negative count, ...).
class InvalidInput : public Error {
public:
    using Error::Error;
};

// Input is well formed but outside what the solver models (gain media, ...).
class UnsupportedInput : public Error {
public:
    using Error::Error;
};

// A numerical procedure did not reach its tolerance.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

}  // namespace speds
