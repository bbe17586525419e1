#pragma once

#include <stdexcept>
#include <string>

namespace avth {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or unsupported input files and streams.
struct FormatError : Error {
    using Error::Error;
};

// Out-of-range parameters, bad config keys.
struct ConfigError : Error {
    using Error::Error;
};

// Tensor / keypoint / frame dimension mismatches.
struct ShapeError : Error {
    using Error::Error;
};

// Corrupt coded payloads.
struct CodecError : Error {
    using Error::Error;
};

// External codec subprocess failures.
struct ProcessError : Error {
    using Error::Error;
};

// Optimization blow-ups (non-finite loss).
struct TrainingError : Error {
    using Error::Error;
};

}  // namespace avth
