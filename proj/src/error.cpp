#include "opidmd/error.hpp"

namespace opidmd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SplitOutOfRange: return "SplitOutOfRange";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::CflViolated: return "CflViolated";
    case ErrorCode::StabilityViolated: return "StabilityViolated";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::SvdFailure: return "SvdFailure";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::EigFailure: return "EigFailure";
    case ErrorCode::DegenerateTruth: return "DegenerateTruth";
  }
  return "Unknown";
}

bool Error::is_numerical() const noexcept {
  switch (code_) {
    case ErrorCode::SvdFailure:
    case ErrorCode::StepUnderflow:
    case ErrorCode::Diverged:
    case ErrorCode::IllConditioned:
    case ErrorCode::RankDeficient:
    case ErrorCode::Singular:
    case ErrorCode::EigFailure:
    case ErrorCode::DegenerateTruth:
      return true;
    default:
      return false;
  }
}

}  // namespace opidmd
