#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bishop {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text; `offset()` is the byte offset of the problem.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Evaluation outside the domain of a function (log of a non-positive real,
/// division by zero, non-finite result).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A caller violated an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (singular system, exhausted precision,
/// bisection found no admissible step).
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

}  // namespace bishop
