#ifndef FLATLAS_ERRORS_HPP
#define FLATLAS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace flatlas {

// Every recoverable failure in the library carries one of these kinds so the
// CLI can map it to an exit code without string matching.
enum class ErrorKind {
  UnboundVariable,
  DomainError,
  TruncationOverflow,
  SamplingFailure,
  UnsupportedEntry,
  EliminationStall,
  NotUnimodular,
  NotCompletable,
  NoExplicitForm,
  NoChartAvailable,
  OutOfDomain,
  DegenerateWaypoints,
  SingularParametrization,
  InfeasibleProfile,
  ParseError,
  Precondition,
  IoError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::UnboundVariable: return "UnboundVariable";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::TruncationOverflow: return "TruncationOverflow";
    case ErrorKind::SamplingFailure: return "SamplingFailure";
    case ErrorKind::UnsupportedEntry: return "UnsupportedEntry";
    case ErrorKind::EliminationStall: return "EliminationStall";
    case ErrorKind::NotUnimodular: return "NotUnimodular";
    case ErrorKind::NotCompletable: return "NotCompletable";
    case ErrorKind::NoExplicitForm: return "NoExplicitForm";
    case ErrorKind::NoChartAvailable: return "NoChartAvailable";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::DegenerateWaypoints: return "DegenerateWaypoints";
    case ErrorKind::SingularParametrization: return "SingularParametrization";
    case ErrorKind::InfeasibleProfile: return "InfeasibleProfile";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::Precondition: return "Precondition";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(error_kind_name(kind)) + ": " + what);
}

}  // namespace flatlas

#endif  // FLATLAS_ERRORS_HPP
