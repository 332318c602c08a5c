#pragma once

#include <stdexcept>
#include <string>

namespace icqnls {

/// Invalid grid, scenario or stepper configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operator or inequality parameter outside its admissible range.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller misuse, e.g. combining fields defined on different grids.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Picard iteration left its contraction regime.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Not enough samples to fit or aggregate.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A field acquired NaN or Inf entries.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace icqnls
