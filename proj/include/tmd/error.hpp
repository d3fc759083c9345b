#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tmd {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or empty input files. Carries the 1-based line number when the
// failure is tied to a specific record (0 = whole-file problem).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Feature layout of an input does not match the consumer (imputer, model).
class SchemaMismatch : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration, reported before any compute starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset-level contract violations: unknown user/sensor/window id, empty
// class, degenerate split requests.
class DatasetError : public Error {
 public:
  using Error::Error;
};

// Model training contract violations: empty training set, non-finite
// features, too few samples for the requested fold count.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace tmd
