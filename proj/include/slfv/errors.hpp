#pragma once

#include <stdexcept>
#include <string>

namespace slfv {

// Bad input: out-of-range parameters, malformed config, unsorted data.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A parameter combination the current code does not handle (for example
// extremal paths with upsilon < 1).
class UnsupportedParameter : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A work budget (event count, path count, window) was exhausted.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(const std::string& what, double time_reached = 0.0)
      : std::runtime_error(what), time_reached_(time_reached) {}
  double time_reached() const { return time_reached_; }

 private:
  double time_reached_;
};

// A forward event whose interval leaves the simulated profile window.
class WindowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace slfv
