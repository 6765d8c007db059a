#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wsmots {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two operands disagree on their dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented precondition or type invariant.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized input. `line()` is 1-based, 0 when not line oriented.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Annotations that parse but cannot be scored (overlaps, misaligned frames).
class AnnotationError : public Error {
 public:
  using Error::Error;
};

}  // namespace wsmots
