#pragma once

#include <stdexcept>
#include <string>

namespace scanpath {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BoundsError : Error { using Error::Error; };
struct ParameterError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
/// Malformed file or row; carries the offending line when known.
struct FormatError : Error { using Error::Error; };
struct ConfigMismatch : Error { using Error::Error; };
/// Non-finite loss or similar numerical breakdown.
struct NumericalError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };

}  // namespace scanpath
