#pragma once

#include <stdexcept>
#include <string>

namespace v2s {

// Error families map to CLI exit codes: validation 1, runtime/size 2, io 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
  using Error::Error;
};
struct FormatError : ValidationError {
  using ValidationError::ValidationError;
};
struct ParseError : ValidationError {
  using ValidationError::ValidationError;
};
struct EmptyDatasetError : ValidationError {
  using ValidationError::ValidationError;
};
struct ShapeError : ValidationError {
  using ValidationError::ValidationError;
};
struct ConfigError : ValidationError {
  using ValidationError::ValidationError;
};
struct PlacementError : ValidationError {
  using ValidationError::ValidationError;
};
struct MappingError : ValidationError {
  using ValidationError::ValidationError;
};
struct ArgumentError : ValidationError {
  using ValidationError::ValidationError;
};

struct RuntimeError : Error {
  using Error::Error;
};
struct NumericError : RuntimeError {
  using RuntimeError::RuntimeError;
};
struct StateError : RuntimeError {
  using RuntimeError::RuntimeError;
};
struct CheckInvalidError : RuntimeError {
  using RuntimeError::RuntimeError;
};
struct OracleSizeError : RuntimeError {
  using RuntimeError::RuntimeError;
};
struct FrozenError : RuntimeError {
  using RuntimeError::RuntimeError;
};

struct IoError : Error {
  using Error::Error;
};
struct CorruptFileError : IoError {
  using IoError::IoError;
};
struct UnsupportedVersionError : IoError {
  using IoError::IoError;
};

}  // namespace v2s
