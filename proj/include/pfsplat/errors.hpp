#pragma once

#include <stdexcept>
#include <string>

namespace pfsplat {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Rotation seed without a well-defined nearest rotation (rank < 2 or non-finite).
class DegenerateRotation : public Error {
 public:
  using Error::Error;
};

/// Camera layout collapses the normalization scale to (almost) zero.
class DegenerateScene : public Error {
 public:
  using Error::Error;
};

/// Config file or command line does not satisfy its schema.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// An optimization produced a non-finite loss or parameter.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// PLY parsing failures, kept distinct so callers can tell them apart.
class PlyHeaderError : public IoError {
 public:
  using IoError::IoError;
};

class PlyTruncatedError : public IoError {
 public:
  using IoError::IoError;
};

class PlyPropertyError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace pfsplat
