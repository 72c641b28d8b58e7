#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cpmm {

enum class ErrorKind {
  InvalidParameter,
  DimensionMismatch,
  ConditionViolated,
  PreconditionViolated,
  Degenerate,
  KappaOutOfRange,
  NonFiniteIterate,
  SolveFailed,
  SingularSystem,
  InsufficientData,
  Unavailable,
  GeometryError,
  BehaviorMismatch,
  ParseError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ConditionViolated: return "ConditionViolated";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::Degenerate: return "Degenerate";
    case ErrorKind::KappaOutOfRange: return "KappaOutOfRange";
    case ErrorKind::NonFiniteIterate: return "NonFiniteIterate";
    case ErrorKind::SolveFailed: return "SolveFailed";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::Unavailable: return "Unavailable";
    case ErrorKind::GeometryError: return "GeometryError";
    case ErrorKind::BehaviorMismatch: return "BehaviorMismatch";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Library-wide exception. `detail` names the violated condition or
/// parameter where one applies (e.g. "cond-gammaG").
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string detail, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        detail_(std::move(detail)) {}

  Error(ErrorKind kind, const std::string& message) : Error(kind, "", message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

inline void require(bool ok, ErrorKind kind, const std::string& message) {
  if (!ok) throw Error(kind, message);
}

}  // namespace cpmm
