#include "hybridcal/error.h"

namespace hybridcal {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidRotation: return "InvalidRotation";
    case ErrorCode::kInvalidCamera: return "InvalidCamera";
    case ErrorCode::kNonConvergent: return "NonConvergent";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kUnderpopulated: return "Underpopulated";
    case ErrorCode::kInvalidTau: return "InvalidTau";
    case ErrorCode::kDegenerate: return "Degenerate";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kZeroBaseline: return "ZeroBaseline";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kChiralityAmbiguous: return "ChiralityAmbiguous";
    case ErrorCode::kDegenerateLine: return "DegenerateLine";
    case ErrorCode::kAtInfinity: return "AtInfinity";
    case ErrorCode::kEmptyResult: return "EmptyResult";
    case ErrorCode::kNoObservations: return "NoObservations";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kNoDescent: return "NoDescent";
    case ErrorCode::kDegenerateConstraint: return "DegenerateConstraint";
    case ErrorCode::kDisconnectedNetwork: return "DisconnectedNetwork";
    case ErrorCode::kMixedScale: return "MixedScale";
    case ErrorCode::kUnknownRig: return "UnknownRig";
    case ErrorCode::kInfeasibleConfig: return "InfeasibleConfig";
    case ErrorCode::kRigMismatch: return "RigMismatch";
    case ErrorCode::kSchemaError: return "SchemaError";
  }
  return "Unknown";
}

bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidRotation:
    case ErrorCode::kInvalidCamera:
    case ErrorCode::kInvalidTau:
    case ErrorCode::kInfeasibleConfig:
    case ErrorCode::kRigMismatch:
    case ErrorCode::kSchemaError:
    case ErrorCode::kUnknownRig:
      return true;
    default:
      return false;
  }
}

}  // namespace hybridcal
