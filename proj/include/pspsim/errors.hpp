#pragma once

#include <stdexcept>
#include <string>

namespace pspsim {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A parameter lies outside its physical/mathematical domain.
struct DomainError : Error {
    using Error::Error;
};

// An operation was asked to produce zero items.
struct EmptyRequestError : Error {
    using Error::Error;
};

// Input sequences that must have matching lengths do not.
struct LengthMismatchError : Error {
    using Error::Error;
};

// Input data is degenerate for the requested statistic (e.g. zero mean).
struct DegenerateInputError : Error {
    using Error::Error;
};

// No pilot tone found above the spectral noise floor.
struct PilotNotFoundError : Error {
    using Error::Error;
};

// Pilot envelope magnitude too small for normalization.
struct LowPilotPowerError : Error {
    using Error::Error;
};

// An operation needs a calibration record that was not supplied.
struct CalibrationRequiredError : Error {
    using Error::Error;
};

// Calibration inputs are mutually inconsistent (e.g. variance below the
// electronic floor).
struct InconsistentCalibrationError : Error {
    using Error::Error;
};

// Cross-correlation peak below the significance threshold.
struct SyncFailureError : Error {
    using Error::Error;
};

// Parameter estimation cannot proceed (insufficient or degenerate data).
struct EstimationDegenerateError : Error {
    using Error::Error;
};

// Configuration file is invalid; message carries the offending field path.
struct ConfigError : Error {
    using Error::Error;
};

// Trace file has a bad magic/version or is truncated.
struct FormatError : Error {
    using Error::Error;
};

}  // namespace pspsim
