#pragma once

#include <stdexcept>
#include <string>

namespace opsurv {

/// Mismatched tensor or input shapes.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// An invalid scalar parameter (pool size, grid size, fold count, ...).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// An operation was invoked in the wrong state (e.g. backward before forward).
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Non-finite or overflowing values during evaluation or training.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad configuration: unknown keys, non-positive grids, no events for tau.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input data: CSV rows, covariate paths undefined at a knot.
struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Data that cannot support the requested fit (empty risk set, no events).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Censoring weights degenerate on the requested evaluation range.
struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace opsurv
