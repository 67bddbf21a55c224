#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hybridcal {

// Every failure the library can signal. The CLI prints the name verbatim on
// standard error, so names are part of the external contract.
enum class ErrorCode {
  kInvalidArgument,
  kInvalidRotation,
  kInvalidCamera,
  kNonConvergent,
  kBehindCamera,
  kUnderpopulated,
  kInvalidTau,
  kDegenerate,
  kTooFewPoints,
  kZeroBaseline,
  kNoConsensus,
  kChiralityAmbiguous,
  kDegenerateLine,
  kAtInfinity,
  kEmptyResult,
  kNoObservations,
  kNumericalFailure,
  kNoDescent,
  kDegenerateConstraint,
  kDisconnectedNetwork,
  kMixedScale,
  kUnknownRig,
  kInfeasibleConfig,
  kRigMismatch,
  kSchemaError,
};

std::string_view error_name(ErrorCode code);

// True for errors caused by malformed input files or arguments (CLI exit 2),
// false for estimation failures (CLI exit 3).
bool is_input_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }
  std::string_view name() const { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace hybridcal
