#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace curvlab {

enum class ErrorCode {
  NonPositiveDefiniteMetric,
  IncompatibleJ,
  DegeneratePlane,
  DimensionTooSmall,
  NotAntiholomorphic,
  EmptyConstraintSpace,
  UnknownChart,
  BadParams,
  OutOfDomain,
  StepTooLarge,
  HypothesisViolated,
  ConclusionViolated,
  ParseError,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDefiniteMetric: return "NonPositiveDefiniteMetric";
    case ErrorCode::IncompatibleJ: return "IncompatibleJ";
    case ErrorCode::DegeneratePlane: return "DegeneratePlane";
    case ErrorCode::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorCode::NotAntiholomorphic: return "NotAntiholomorphic";
    case ErrorCode::EmptyConstraintSpace: return "EmptyConstraintSpace";
    case ErrorCode::UnknownChart: return "UnknownChart";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::HypothesisViolated: return "HypothesisViolated";
    case ErrorCode::ConclusionViolated: return "ConclusionViolated";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace curvlab
