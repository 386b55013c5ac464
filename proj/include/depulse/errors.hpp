#pragma once

#include <stdexcept>
#include <string>

namespace depulse {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : Error {
    using Error::Error;
};
struct FormatError : Error {
    using Error::Error;
};
struct BoundsError : Error {
    using Error::Error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct PartitionError : Error {
    using Error::Error;
};
struct DegenerateSignalError : Error {
    using Error::Error;
};
struct DegenerateFitError : Error {
    using Error::Error;
};
// Thrown by the detector when max(mu - mu_m) vanishes, i.e. there is no
// impulsive content to normalize against.
struct NoPulseEvidenceError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};
// Bad injection/restoration specification (overlaps, out-of-range pulses).
struct SpecError : Error {
    using Error::Error;
};
// Not enough samples before the discontinuity to fit the AR model.
struct ContextError : Error {
    using Error::Error;
};

}  // namespace depulse
