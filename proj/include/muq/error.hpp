#pragma once

#include <stdexcept>
#include <string>

namespace muq {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonPhysicalError : Error { using Error::Error; };
struct OutOfRangeError : Error { using Error::Error; };
struct DegenerateError : Error { using Error::Error; };
struct IndexOutOfRangeError : Error { using Error::Error; };
struct TargetUnreachableError : Error { using Error::Error; };
struct DimensionMismatchError : Error { using Error::Error; };
struct ShapeMismatchError : Error { using Error::Error; };
struct DatasetTooSmallError : Error { using Error::Error; };
struct DivergedError : Error { using Error::Error; };
struct CorruptFileError : Error { using Error::Error; };
struct InvalidBoundsError : Error { using Error::Error; };
struct BadFractionsError : Error { using Error::Error; };
struct EmptySetError : Error { using Error::Error; };
struct SizeOverflowError : Error { using Error::Error; };
struct PropertyMismatchError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

/// Iterative solver hit the iteration cap before reaching the requested
/// residual. Carries the diagnostics the caller needs to decide what to do.
struct NoConvergenceError : Error {
    int iterations;
    double residual;
    NoConvergenceError(const std::string& what, int iterations_, double residual_)
        : Error(what), iterations(iterations_), residual(residual_) {}
};

}  // namespace muq
