#pragma once

#include <stdexcept>
#include <string>

namespace raptor {

// Base class for all errors raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration value (non-positive budget, k > N, unknown flag value).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed caller input (empty corpus, dimension mismatch, zero vector).
class InvalidInputError : public Error {
public:
    using Error::Error;
};

// Embedding or summarization backend failed after retries, or returned
// an unusable payload.
class ProviderError : public Error {
public:
    using Error::Error;
};

// Filesystem problem; message carries the offending path.
class IoError : public Error {
public:
    using Error::Error;
};

// Index file failed checksum or invariant validation on load.
class CorruptIndexError : public Error {
public:
    using Error::Error;
};

// Index file declares a format version this build does not read.
class UnsupportedVersionError : public Error {
public:
    using Error::Error;
};

// Too few points for dimensionality reduction; callers fall back to
// clustering the raw vectors.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// Non-finite likelihood or other numeric breakdown during fitting.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace raptor
