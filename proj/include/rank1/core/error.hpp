#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rank1 {

/// Error categories raised by the library. Each value names one failure
/// contract of a module operation; the CLI maps them onto exit codes.
enum class ErrorCode {
  // geometry
  StepTooLarge,
  ChartEscape,
  DomainError,
  InvalidModel,
  // jacobi
  BlowUp,
  InsufficientBurnIn,
  WindowTooShort,
  // lyapunov
  NotClosed,
  NoFixedPoint,
  SchwarzViolation,
  // orbits
  NoConvergence,
  HypothesisViolation,
  NoConnector,
  CellOverlap,
  NoCrossing,
  // symbolic
  ConvergenceFailure,
  BracketFailure,
  Overflow,
  // thermo
  SourceFailure,
  NonConvexInput,
  RangeTooNarrow,
  MonotonicityViolation,
  // cli / io
  InvalidConfig,
  MissingManifest,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::ChartEscape: return "ChartEscape";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::InsufficientBurnIn: return "InsufficientBurnIn";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::NotClosed: return "NotClosed";
    case ErrorCode::NoFixedPoint: return "NoFixedPoint";
    case ErrorCode::SchwarzViolation: return "SchwarzViolation";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::HypothesisViolation: return "HypothesisViolation";
    case ErrorCode::NoConnector: return "NoConnector";
    case ErrorCode::CellOverlap: return "CellOverlap";
    case ErrorCode::NoCrossing: return "NoCrossing";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::SourceFailure: return "SourceFailure";
    case ErrorCode::NonConvexInput: return "NonConvexInput";
    case ErrorCode::RangeTooNarrow: return "RangeTooNarrow";
    case ErrorCode::MonotonicityViolation: return "MonotonicityViolation";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MissingManifest: return "MissingManifest";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// BlowUp carries the time at which the Riccati solution left the ceiling.
class BlowUpError : public Error {
 public:
  BlowUpError(double time, const std::string& message)
      : Error(ErrorCode::BlowUp, message), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace rank1
