#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rgmc {

// Malformed data passed to an operation (shape mismatch, non-finite values, ...).
struct InvalidInputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Out-of-range or inconsistent configuration value.
struct InvalidParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A non-uniform frequency fell outside the representable band.
struct BandLimitError : std::runtime_error {
    BandLimitError(const std::string& msg, std::ptrdiff_t time_index = -1)
        : std::runtime_error(msg), time_index(time_index) {}

    std::ptrdiff_t time_index;  // offending readout index, -1 if not line-associated
};

// An iterative solver stopped before reaching its target tolerance.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& msg, double achieved_gap)
        : std::runtime_error(msg), achieved_gap(achieved_gap) {}

    double achieved_gap;
};

// The outer optimization produced a non-finite objective.
struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& msg, int scale_index, int stage_index)
        : std::runtime_error(msg), scale_index(scale_index), stage_index(stage_index) {}

    int scale_index;
    int stage_index;
};

}  // namespace rgmc
