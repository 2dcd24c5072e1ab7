#pragma once

#include <stdexcept>
#include <string>

namespace invlab {

/// Invalid user configuration: bad grid, bad model parameters, unknown keys.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A model property required by the construction does not hold (e.g. a non-monotone Psi).
class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

/// Argument outside the domain where a closed form is defined.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Floating point breakdown (vanishing survival probability, non-convergence, singular systems).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// A caller-side precondition was violated (negative payoff, decreasing cashflow, ...).
class PreconditionError : public std::invalid_argument {
public:
    explicit PreconditionError(const std::string& what) : std::invalid_argument(what) {}
};

#define INVLAB_REQUIRE(cond, ErrorType, msg)                                   \
    do {                                                                       \
        if (!(cond)) throw ErrorType(std::string(msg));                        \
    } while (0)

}  // namespace invlab
