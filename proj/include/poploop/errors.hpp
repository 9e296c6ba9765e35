#pragma once

#include <stdexcept>
#include <string>

namespace poploop {

// Raised for invalid configuration: bad field values, violated config
// invariants, unknown keys. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when model training cannot proceed (divergence, degenerate splits).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an estimator's preconditions on the data fail
// (e.g. positions with zero coverage).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for unreadable, unwritable, or malformed files. Messages for parse
// failures carry the offending line number. The CLI maps this to exit code 1.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace poploop
