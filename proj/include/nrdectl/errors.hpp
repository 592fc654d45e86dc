#pragma once

#include <stdexcept>
#include <string>

namespace nrdectl {

/// Incompatible tensor shapes or dimensions between components.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values, invalid trajectories, singular systems.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Misuse of an autodiff tape (stale handles, non-scalar roots).
class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid experiment configuration. `line` is 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace nrdectl
