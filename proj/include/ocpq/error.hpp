#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ocpq {

enum class ErrorCode {
  ParseError,
  UnknownRef,
  DanglingRef,
  EventWithoutObjects,
  DuplicateId,
  UnboundVariableInPredicate,
  QueryInvalid,
  UnknownNode,
  ResultTooLarge,
  TooLargeForOracle,
  Timeout,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure raised by the library. The code is
/// stable and is what the CLI and HTTP layers map to exit codes / statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A validation result tied to the id of the offending log entry or query node.
struct Finding {
  std::string code;
  std::string ref;
  std::string message;

  bool operator==(const Finding&) const = default;
};

}  // namespace ocpq
