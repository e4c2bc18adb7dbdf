#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace condsamp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when an integrator produces a non-finite state. `step` is the index
/// of the offending step (0-based).
struct IntegrationDivergedError : Error {
    std::size_t step;
    IntegrationDivergedError(std::size_t step_, const std::string& what_)
        : Error(what_), step(step_) {}
};

/// Configuration / input validation failure. `field` carries the dotted path
/// of the offending field when known (e.g. "bias.k").
struct ConfigError : Error {
    std::string field;
    explicit ConfigError(const std::string& what_, std::string field_ = {})
        : Error(what_), field(std::move(field_)) {}
};

struct DimensionError : Error {
    using Error::Error;
};

}  // namespace condsamp
