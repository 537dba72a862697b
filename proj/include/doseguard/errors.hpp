#pragma once

#include <stdexcept>
#include <string>

namespace doseguard {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (corpus lines, labels, matrices).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid argument or configuration supplied by the caller.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Model fitting failed (e.g. a fold could not be trained).
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Binary or JSON container could not be decoded.
class FormatError : public Error {
public:
    using Error::Error;
};

class BadMagicError : public FormatError {
public:
    using FormatError::FormatError;
};

class UnsupportedVersionError : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedFileError : public FormatError {
public:
    using FormatError::FormatError;
};

}  // namespace doseguard
