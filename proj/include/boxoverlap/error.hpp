#pragma once

#include <stdexcept>
#include <string>

namespace boxoverlap {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments, inconsistent configuration, unknown ids.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data or failed file access.
class DataError : public Error {
 public:
  using Error::Error;
};

// A geometric precondition does not hold (empty views, degenerate boxes, ...).
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Optimization produced a non-finite value.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace boxoverlap
