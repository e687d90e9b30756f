#pragma once

#include <stdexcept>
#include <string>

namespace kesten {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent model / run configuration.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = -1)
      : Error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  /// 1-based line in the configuration file, or -1 when not tied to a line.
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Numerical failure: bracketing, non-convergence, overflow, exhausted budgets.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace kesten
