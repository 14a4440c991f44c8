// errors.hpp
// Error types shared across the simulator.

#pragma once

#include <stdexcept>
#include <string>

namespace ewsim {

// Invalid configuration: bad mode registers, out-of-range parameters,
// malformed config files. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when an estimator is asked to divide by an empty conditioning
// sample ("insufficient statistics"), never by a raw division by zero.
class StatsError : public std::runtime_error {
public:
    explicit StatsError(const std::string& what) : std::runtime_error(what) {}
};

// Degenerate or rejected input to a least-squares fit.
class FitError : public std::runtime_error {
public:
    explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ewsim
