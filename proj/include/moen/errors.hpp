#pragma once

#include <stdexcept>
#include <string>

namespace moen {

/// Base class for failures of the numerical core (blow-up, rank loss, ...).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A state or matrix entry became NaN/Inf. Signals integrator blow-up,
/// e.g. a backward-in-time solve leaving the stable region.
struct NonFiniteError : NumericError {
    using NumericError::NumericError;
};

/// A dense solve met a pivot below the singularity threshold.
struct SingularError : NumericError {
    using NumericError::NumericError;
};

/// Evaluation time outside the trajectory's grid range (beyond slack).
struct OutOfRangeError : NumericError {
    using NumericError::NumericError;
};

/// Vector/matrix operands of incompatible sizes.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A linear-theory routine was handed a nonlinear model.
struct NotLinearError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Configuration file rejected (unknown key, bad value, failed invariant).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// File could not be read or written.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace moen
