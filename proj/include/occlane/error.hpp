#pragma once

#include <stdexcept>
#include <string>

namespace occlane {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read, written or decoded.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented invariant (manifest, config, raster shape).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Invalid operation parameters (e.g. scene parameters that push lanes off-frame).
class ParamError : public Error {
 public:
  using Error::Error;
};

}  // namespace occlane
