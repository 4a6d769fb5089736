#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mkflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, const std::string& source = {})
      : Error((source.empty() ? "" : source + ":") + "line " + std::to_string(line) + ": " + message),
        message_(message),
        line_(line) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  std::size_t line_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Density normalisation found no positive mass.
class AllZero : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Operation only defined for a particular grid dimension.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Advection would need more substeps than the configured cap.
class CflUnsatisfiable : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

/// Dual ascent could not make any progress from its starting point.
class Diverged : public Error {
 public:
  using Error::Error;
};

}  // namespace mkflow
