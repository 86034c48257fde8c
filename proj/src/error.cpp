#include "pemcloak/error.hpp"

namespace pemcloak {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOmegaTooCloseToBoundary: return "OMEGA_TOO_CLOSE_TO_BOUNDARY";
    case ErrorCode::kDegenerateElement: return "DEGENERATE_ELEMENT";
    case ErrorCode::kUnsupportedDegree: return "UNSUPPORTED_DEGREE";
    case ErrorCode::kEvalAtElectrode: return "EVAL_AT_ELECTRODE";
    case ErrorCode::kMapDegenerate: return "MAP_DEGENERATE";
    case ErrorCode::kNonpositiveConductivity: return "NONPOSITIVE_CONDUCTIVITY";
    case ErrorCode::kSupportViolation: return "SUPPORT_VIOLATION";
    case ErrorCode::kNoConvergence: return "NO_CONVERGENCE";
    case ErrorCode::kIncompatibleLoad: return "INCOMPATIBLE_LOAD";
    case ErrorCode::kGramSingular: return "GRAM_SINGULAR";
    case ErrorCode::kSeedInSpan: return "SEED_IN_SPAN";
    case ErrorCode::kPositivityViolation: return "POSITIVITY_VIOLATION";
    case ErrorCode::kMaxBackoffsExceeded: return "MAX_BACKOFFS_EXCEEDED";
    case ErrorCode::kNotMeanFree: return "NOT_MEAN_FREE";
    case ErrorCode::kArcsNotResolved: return "ARCS_NOT_RESOLVED";
    case ErrorCode::kParseError: return "PARSE_ERROR";
    case ErrorCode::kValidationError: return "VALIDATION_ERROR";
    case ErrorCode::kMissingArtifact: return "MISSING_ARTIFACT";
  }
  return "UNKNOWN";
}

}  // namespace pemcloak
