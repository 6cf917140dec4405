#pragma once

#include <stdexcept>
#include <string>

namespace swz {

enum class ErrorKind {
  InvalidArgument,
  InvariantViolation,
  Syntax,
  UnknownIdentifier,
  UnboundIdentifier,
  DivisionByZero,
  NegativeIntermediate,
  Overflow,
  UnknownPattern,
  GridRejected,
  NotBijective,
  GridTooLarge,
  TraceMismatch,
  MixedKernels,
  Schema,
  CorruptReport,
  MissingExpression,
  ProposerFailure,
  Exhausted,
  Transport,
  Timeout,
  DigestMismatch,
  Io,
};

const char* to_string(ErrorKind kind);

// Base for every failure raised by the library. The kind is stable and is
// what callers (tests, CLI exit-code mapping) switch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Parser failures carry the byte offset into the source text.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t position)
      : Error(ErrorKind::Syntax, what + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace swz
