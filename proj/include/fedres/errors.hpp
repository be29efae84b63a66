#pragma once

#include <stdexcept>
#include <string>

namespace fedres {

/// Invalid user-supplied configuration or input data.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File system or stream failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Internal contract violated (missing history, dimension mismatch, ...).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed LIBSVM text; carries the 1-based line number.
class ParseError : public ConfigError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace fedres
