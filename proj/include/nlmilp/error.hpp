#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlmilp {

enum class ErrorCode {
  kInvalidArgument,
  kDuplicateSymbol,
  kDuplicateClause,
  kInvalidShape,
  kShapeMismatch,
  kUnknownClause,
  kUnknownSymbol,
  kIoError,
  kSchemaViolation,
  kParseError,
  kNonlinearTerm,
  kMissingData,
  kIndexOutOfRange,
  kInvalidAnnotation,
  kMissingPlaceholder,
  kUnparseable,
  kTransportError,
  kTranscriptMiss,
  kNoObjectiveFound,
  kObjectiveConflict,
  kDebugExhausted,
  kUnknownTarget,
  kInvalidPayload,
  kStagePrecondition,
  kEngineUnavailable,
  kEngineError,
  kUnrepresentableAnnotation,
  kLpSyntaxError,
  kMissingDuals,
  kRestrictedInfeasible,
  kIterationLimit,
  kSearchBudgetExceeded,
  kBusy,
};

std::string_view error_code_name(ErrorCode code);

// All library failures are reported through this exception. The code is
// stable and machine readable; the message is meant for humans (and for the
// debug loop, which feeds it back to the model).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  std::string_view code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace nlmilp
