#include "swizzle/error.hpp"

namespace swz {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::InvariantViolation: return "invariant-violation";
    case ErrorKind::Syntax: return "syntax";
    case ErrorKind::UnknownIdentifier: return "unknown-identifier";
    case ErrorKind::UnboundIdentifier: return "unbound-identifier";
    case ErrorKind::DivisionByZero: return "division-by-zero";
    case ErrorKind::NegativeIntermediate: return "negative-intermediate";
    case ErrorKind::Overflow: return "overflow";
    case ErrorKind::UnknownPattern: return "unknown-pattern";
    case ErrorKind::GridRejected: return "grid-rejected";
    case ErrorKind::NotBijective: return "not-bijective";
    case ErrorKind::GridTooLarge: return "grid-too-large";
    case ErrorKind::TraceMismatch: return "trace-mismatch";
    case ErrorKind::MixedKernels: return "mixed-kernels";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::CorruptReport: return "corrupt-report";
    case ErrorKind::MissingExpression: return "missing-expression";
    case ErrorKind::ProposerFailure: return "proposer-failure";
    case ErrorKind::Exhausted: return "exhausted";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::Timeout: return "timeout";
    case ErrorKind::DigestMismatch: return "digest-mismatch";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace swz
