#pragma once

#include <stdexcept>
#include <string>

namespace focusdiag {

enum class ErrorCode {
  Syntax,
  DuplicateComponent,
  DanglingConnection,
  DomainViolation,
  InvalidModel,
  Evaluation,
  Undetermined,
  MissingSource,
  NonFiniteDomain,
  NoFixedPoint,
  TraceTooShort,
  NonObservable,
  DegenerateFocus,
  SizeLimit,
  InvalidFault,
  DuplicateMeasurement,
  SessionTerminal,
  NotFound,
  Io,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Syntax: return "syntax_error";
    case ErrorCode::DuplicateComponent: return "duplicate_component";
    case ErrorCode::DanglingConnection: return "dangling_connection";
    case ErrorCode::DomainViolation: return "domain_violation";
    case ErrorCode::InvalidModel: return "invalid_model";
    case ErrorCode::Evaluation: return "evaluation_error";
    case ErrorCode::Undetermined: return "undetermined_value";
    case ErrorCode::MissingSource: return "missing_source_observation";
    case ErrorCode::NonFiniteDomain: return "non_finite_domain";
    case ErrorCode::NoFixedPoint: return "no_fixed_point";
    case ErrorCode::TraceTooShort: return "trace_too_short";
    case ErrorCode::NonObservable: return "non_observable";
    case ErrorCode::DegenerateFocus: return "degenerate_focus";
    case ErrorCode::SizeLimit: return "size_limit_exceeded";
    case ErrorCode::InvalidFault: return "invalid_fault";
    case ErrorCode::DuplicateMeasurement: return "duplicate_measurement";
    case ErrorCode::SessionTerminal: return "session_terminal";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Io: return "io_error";
  }
  return "error";
}

/// Single exception type for every engine failure; `code()` tells callers
/// (CLI exit codes, HTTP status mapping) what kind of failure it was.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace focusdiag
