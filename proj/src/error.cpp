#include "ocpq/error.hpp"

namespace ocpq {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownRef: return "UnknownRef";
    case ErrorCode::DanglingRef: return "DanglingRef";
    case ErrorCode::EventWithoutObjects: return "EventWithoutObjects";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnboundVariableInPredicate: return "UnboundVariableInPredicate";
    case ErrorCode::QueryInvalid: return "QueryInvalid";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::ResultTooLarge: return "ResultTooLarge";
    case ErrorCode::TooLargeForOracle: return "TooLargeForOracle";
    case ErrorCode::Timeout: return "Timeout";
  }
  return "Unknown";
}

}  // namespace ocpq
