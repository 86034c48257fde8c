#pragma once

#include <stdexcept>
#include <string>

namespace pemcloak {

// Machine-readable failure codes surfaced through Error. The CLI maps these
// onto exit codes, so names are stable.
enum class ErrorCode {
  kOmegaTooCloseToBoundary,
  kDegenerateElement,
  kUnsupportedDegree,
  kEvalAtElectrode,
  kMapDegenerate,
  kNonpositiveConductivity,
  kSupportViolation,
  kNoConvergence,
  kIncompatibleLoad,
  kGramSingular,
  kSeedInSpan,
  kPositivityViolation,
  kMaxBackoffsExceeded,
  kNotMeanFree,
  kArcsNotResolved,
  kParseError,
  kValidationError,
  kMissingArtifact,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }
  const char* name() const { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace pemcloak
