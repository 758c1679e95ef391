#pragma once

#include <stdexcept>
#include <string>

namespace poiseuille {

// Invalid user-supplied parameters (grid sizes, constants, config values).
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Parameter outside the mathematical domain of a formula (e.g. nu not in (0,1)).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Array length does not match the grid or k-grid it is used with.
class ShapeError : public std::length_error {
public:
    explicit ShapeError(const std::string& what) : std::length_error(what) {}
};

// Singular solve, NaN/overflow, step-size guard violation.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Output path cannot be created or written.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace poiseuille
