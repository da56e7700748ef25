#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace funcast {

enum class ErrorCode {
  // curves
  NonPositivePrice,
  NonIncreasingTimestamp,
  GridMisaligned,
  EmptyDay,
  AlreadyDemeaned,
  // fpca
  NotDemeaned,
  DegeneratePanel,
  AllZeroEigenvalues,
  IndexOutOfRange,
  // score models
  DegenerateSeries,
  NonConvergence,
  SingularRegressor,
  NonPsdH,
  // forecast
  NonPsdCov,
  InsufficientHistory,
  // rolling
  InsufficientData,
  BadHorizon,
  SingularDesign,
  // eval
  LengthMismatch,
  InvalidBounds,
  SeriesTooShort,
  // sim
  InvalidSpec,
  // generic
  PreconditionViolation,
  ConfigInvalid,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositivePrice: return "NonPositivePrice";
    case ErrorCode::NonIncreasingTimestamp: return "NonIncreasingTimestamp";
    case ErrorCode::GridMisaligned: return "GridMisaligned";
    case ErrorCode::EmptyDay: return "EmptyDay";
    case ErrorCode::AlreadyDemeaned: return "AlreadyDemeaned";
    case ErrorCode::NotDemeaned: return "NotDemeaned";
    case ErrorCode::DegeneratePanel: return "DegeneratePanel";
    case ErrorCode::AllZeroEigenvalues: return "AllZeroEigenvalues";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::SingularRegressor: return "SingularRegressor";
    case ErrorCode::NonPsdH: return "NonPsdH";
    case ErrorCode::NonPsdCov: return "NonPsdCov";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::BadHorizon: return "BadHorizon";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidBounds: return "InvalidBounds";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Broad failure class, used by the CLI to pick an exit code.
enum class ErrorKind { Config, Data, Numerical };

constexpr ErrorKind kind_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::BadHorizon:
      return ErrorKind::Config;
    case ErrorCode::NonConvergence:
    case ErrorCode::SingularRegressor:
    case ErrorCode::NonPsdH:
    case ErrorCode::NonPsdCov:
    case ErrorCode::SingularDesign:
    case ErrorCode::AllZeroEigenvalues:
      return ErrorKind::Numerical;
    default:
      return ErrorKind::Data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace funcast
