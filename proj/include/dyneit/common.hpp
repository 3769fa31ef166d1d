#pragma once

#include <stdexcept>
#include <string>

namespace dyneit {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameter or configuration.
struct ParameterError : Error {
  using Error::Error;
};

/// Mesh invariant violation (orientation, connectivity, electrode layout).
struct MeshError : Error {
  using Error::Error;
};

/// Malformed input file; message carries the offending line where known.
struct ParseError : Error {
  using Error::Error;
};

/// Numerical failure (solver breakdown, NaN iterate, non-convergence).
struct NumericError : Error {
  using Error::Error;
};

/// Mismatched vector/matrix dimensions between coupled quantities.
struct ShapeError : Error {
  using Error::Error;
};

}  // namespace dyneit
