#include "cmoe/error.hpp"

namespace cmoe {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSingularMatrix: return "SingularMatrix";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kAllZeroWeights: return "AllZeroWeights";
    case ErrorCode::kDegenerateSample: return "DegenerateSample";
    case ErrorCode::kNoFeasiblePoint: return "NoFeasiblePoint";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kZeroVarianceFeature: return "ZeroVarianceFeature";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kNonNumericCell: return "NonNumericCell";
    case ErrorCode::kStateError: return "StateError";
    case ErrorCode::kDelayTooLarge: return "DelayTooLarge";
    case ErrorCode::kSingleBatch: return "SingleBatch";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace cmoe
