#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ois {

// Base for every error raised by the library. Each subclass maps to one
// failure family so callers (CLI, HTTP service) can translate them into exit
// codes or status codes without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or size mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced or consumed where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// More clicks than the sparse slot budget allows.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// A prompt set that cannot produce the requested map (no positives, wrong
// polarity).
class PromptError : public Error {
 public:
  using Error::Error;
};

// Invalid argument values (non-binary targets, empty inputs, bad enums).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Missing, malformed or corrupted files and datasets.
class DataError : public Error {
 public:
  using Error::Error;
};

// Inconsistent run configuration (missing checkpoint for an arm, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public NumericError {
 public:
  TrainingError(std::int64_t step, const std::string& what)
      : NumericError("training diverged at step " + std::to_string(step) +
                     ": " + what),
        step_(step) {}

  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

}  // namespace ois
