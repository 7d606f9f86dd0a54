#pragma once

#include <stdexcept>
#include <string>

namespace fakeaudio {

// Root of every error thrown by the library. The CLI maps ConfigError to
// exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed container or checkpoint bytes (magic, version, header fields).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Short reads, unopenable files.
class IoError : public Error {
 public:
  using Error::Error;
};

// Data that parses but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad user-supplied settings (proportions, hyperparameters, paths).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Matrix/vector width disagreements.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Objects used out of protocol, e.g. a forward cache from another model.
class StateError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fakeaudio
