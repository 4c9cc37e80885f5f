#pragma once

#include <stdexcept>
#include <string>

namespace xsplat {

// Error taxonomy shared across the toolkit. Each named failure condition of
// an operation contract gets its own type so callers can catch precisely.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateProjection : Error { using Error::Error; };
struct BehindSource : Error { using Error::Error; };
struct InsufficientPoints : Error { using Error::Error; };
struct DegenerateConfiguration : Error { using Error::Error; };
struct CalibrationFailed : Error { using Error::Error; };
struct InvalidSpec : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct InvalidCrop : Error { using Error::Error; };
struct CropOutOfBounds : Error { using Error::Error; };
struct InvalidReference : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace xsplat
