#pragma once

#include <stdexcept>
#include <string>

namespace flowpose {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Axis-angle vector with |r| >= pi, outside the canonical chart.
struct NonCanonicalRotation : Error {
    using Error::Error;
};

// Rotation angle within tolerance of pi; the logarithm is ill-conditioned there.
struct NearPiRotation : Error {
    using Error::Error;
};

// Point with non-positive depth handed to the pinhole projection.
struct BehindCamera : Error {
    using Error::Error;
};

struct ShapeMismatch : Error {
    using Error::Error;
};

struct EmptyMask : Error {
    using Error::Error;
};

// Crop rectangle outside the source frame or resize factor out of bounds.
struct InvalidCrop : Error {
    using Error::Error;
};

// No crop satisfies both the FoV target and the resize-factor bound.
struct Infeasible : Error {
    using Error::Error;
};

struct NonFinite : Error {
    using Error::Error;
};

// Training loss became non-finite.
struct Diverged : Error {
    using Error::Error;
};

struct DegenerateTrajectory : Error {
    using Error::Error;
};

struct TrajectoryTooShort : Error {
    using Error::Error;
};

// Config or input file could not be parsed; message carries the line number.
struct ParseError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Trajectory pair with incompatible lengths or timestamps.
struct MismatchError : Error {
    using Error::Error;
};

}  // namespace flowpose
