#pragma once

#include <stdexcept>
#include <string>

namespace gclpr {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// An input contained NaN or infinity where a finite value is required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// A linear system could not be solved even after ridge escalation.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// Shapes or sizes of inputs do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Too little data for the requested statistic (e.g. covariance of one row).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// A graph context referenced a node id that is not in the graph.
class UnknownNodeError : public Error {
 public:
  using Error::Error;
};

/// Model was asked to fit or predict with no training rows.
class EmptyTrainingError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration: unknown keys, out-of-range values, missing bindings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or stream failure while reading or writing.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed data content (bad CSV cell, missing column, ragged rows).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical quadrature failed its self-consistency check.
class QuadratureError : public Error {
 public:
  using Error::Error;
};

/// A theory oracle was queried at an atom with zero context mass.
class ZeroMassError : public Error {
 public:
  using Error::Error;
};

/// Every candidate in a model-selection grid failed to fit.
class AllFitsFailedError : public Error {
 public:
  using Error::Error;
};

}  // namespace gclpr
