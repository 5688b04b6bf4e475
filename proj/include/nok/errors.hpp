#pragma once

#include <stdexcept>
#include <string>

namespace nok {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A precondition on user-supplied data failed.
struct InvalidInputError : Error {
    using Error::Error;
};

/// The requested operation is not defined for the given object.
struct UnsupportedOperationError : Error {
    using Error::Error;
};

/// A matrix that must be invertible is singular (or numerically so).
struct SingularInputError : Error {
    using Error::Error;
};

/// An iterate or objective became non-finite.
struct NumericOverflowError : Error {
    NumericOverflowError(const std::string& what, long step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_index(step) {}
    long step_index;
};

/// Problem size exceeds a hard limit of a desk-scale routine.
struct ScaleLimitError : Error {
    using Error::Error;
};

/// Text input could not be parsed; row/column are 1-based, 0 = unknown.
struct ParseError : Error {
    ParseError(const std::string& what, long row = 0, long col = 0)
        : Error(what + (row > 0 ? " at row " + std::to_string(row) +
                                      (col > 0 ? ", column " + std::to_string(col) : "")
                                : "")),
          row(row),
          column(col) {}
    long row;
    long column;
};

/// An internal consistency check failed (should be impossible on valid data).
struct IntegrityError : Error {
    using Error::Error;
};

/// Filesystem-level failure.
struct IoError : Error {
    using Error::Error;
};

}  // namespace nok
