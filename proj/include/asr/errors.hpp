#pragma once

#include <stdexcept>
#include <string>

namespace asr {

/// A caller broke a documented precondition (sizes, ranges, indices).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// NaN/Inf appeared where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File missing, truncated, corrupt, or of the wrong version.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration key or value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejection sampling could not find a feasible layout.
class InfeasibleLayout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace asr
