#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dfisim {

/// Base class of every error thrown by the simulator.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Mini-IR syntax or resolution error; carries the 1-based source line.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Structural problem with a program or configuration (bad ids, double
/// instrumentation, out-of-range RDT access, ...).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Runtime failure of the interpreted program.
class ExecutionError : public Error {
public:
  using Error::Error;
};

} // namespace dfisim
