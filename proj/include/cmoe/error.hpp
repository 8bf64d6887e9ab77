#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cmoe {

enum class ErrorCode {
  kInvalidArgument,
  kSingularMatrix,
  kDimensionMismatch,
  kShapeMismatch,
  kLengthMismatch,
  kIndexOutOfRange,
  kAllZeroWeights,
  kDegenerateSample,
  kNoFeasiblePoint,
  kZeroVariance,
  kZeroVarianceFeature,
  kIoError,
  kMissingColumn,
  kNonNumericCell,
  kStateError,
  kDelayTooLarge,
  kSingleBatch,
  kFormatVersionMismatch,
  kParseError,
  kConfigError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (the CLI in particular) can map failures onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cmoe
