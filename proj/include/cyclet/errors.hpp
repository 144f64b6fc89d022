#pragma once

#include <stdexcept>
#include <string>

namespace cyclet {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor shape / dimension mismatch. Message names the offending dimension.
struct ShapeError : Error {
  using Error::Error;
};

/// Invalid argument value (out-of-range coefficient, bad factor, ...).
struct ValueError : Error {
  using Error::Error;
};

/// Filesystem / stream failure. Message carries the path.
struct IoError : Error {
  using Error::Error;
};

/// Config file rejected (unknown key, bad type, invariant violation).
struct ConfigError : Error {
  using Error::Error;
};

/// PPM parse failure with a machine-checkable kind.
struct PpmError : IoError {
  enum class Kind { unsupported_format, malformed_header, bad_maxval, truncated };

  PpmError(Kind k, const std::string& msg) : IoError(msg), kind(k) {}
  Kind kind;
};

}  // namespace cyclet
