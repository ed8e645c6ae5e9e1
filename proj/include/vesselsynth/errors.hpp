#pragma once

#include <stdexcept>
#include <string>

namespace vesselsynth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value violates its documented invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The generator could not place any branch (degenerate geometry).
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Tensor or image shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input data is missing, corrupt or otherwise unusable.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, failed gradient checks, uninitialized statistics.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A metric cannot be computed for the given masks (e.g. empty FOV).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace vesselsynth
