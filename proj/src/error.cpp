#include "nlmilp/error.hpp"

namespace nlmilp {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDuplicateSymbol: return "DuplicateSymbol";
    case ErrorCode::kDuplicateClause: return "DuplicateClause";
    case ErrorCode::kInvalidShape: return "InvalidShape";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kUnknownClause: return "UnknownClause";
    case ErrorCode::kUnknownSymbol: return "UnknownSymbol";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kNonlinearTerm: return "NonlinearTerm";
    case ErrorCode::kMissingData: return "MissingData";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kInvalidAnnotation: return "InvalidAnnotation";
    case ErrorCode::kMissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::kUnparseable: return "Unparseable";
    case ErrorCode::kTransportError: return "TransportError";
    case ErrorCode::kTranscriptMiss: return "TranscriptMiss";
    case ErrorCode::kNoObjectiveFound: return "NoObjectiveFound";
    case ErrorCode::kObjectiveConflict: return "ObjectiveConflict";
    case ErrorCode::kDebugExhausted: return "DebugExhausted";
    case ErrorCode::kUnknownTarget: return "UnknownTarget";
    case ErrorCode::kInvalidPayload: return "InvalidPayload";
    case ErrorCode::kStagePrecondition: return "StagePrecondition";
    case ErrorCode::kEngineUnavailable: return "EngineUnavailable";
    case ErrorCode::kEngineError: return "EngineError";
    case ErrorCode::kUnrepresentableAnnotation: return "UnrepresentableAnnotation";
    case ErrorCode::kLpSyntaxError: return "LpSyntaxError";
    case ErrorCode::kMissingDuals: return "MissingDuals";
    case ErrorCode::kRestrictedInfeasible: return "RestrictedInfeasible";
    case ErrorCode::kIterationLimit: return "IterationLimit";
    case ErrorCode::kSearchBudgetExceeded: return "SearchBudgetExceeded";
    case ErrorCode::kBusy: return "Busy";
  }
  return "Unknown";
}

}  // namespace nlmilp
