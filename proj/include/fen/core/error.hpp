#pragma once

#include <stdexcept>
#include <string>

namespace fen {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

// Violated call precondition (e.g. backward() on a non-scalar).
class ContractError : public Error {
public:
    using Error::Error;
};

// Non-finite loss during optimisation.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace fen
