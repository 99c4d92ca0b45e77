#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spateval {

enum class ErrorCode {
  InvalidArgument,
  // parsing
  NoRelationFound,
  MalformedClause,
  EmptyObject,
  // graph / sphere
  SelfLoop,
  CenterNotInGraph,
  // metrics
  EmptyPrompt,
  DegeneratePrompt,
  EmptyBatch,
  // dataset
  DuplicateCategory,
  SampleTooLarge,
  Io,
  Schema,
  TripleMismatch,
  // vlm
  Network,
  Auth,
  Timeout,
  MalformedResponse,
  CassetteDecode,
  CassetteMiss,
  // guidance
  NonFiniteInput,
  ZeroAttentionDenominator,
  NonFiniteLoss,
  Internal,
};

const char* error_code_name(ErrorCode code);

/// Exception carrying a stable error code plus optional source context
/// (byte offset into parsed text, or line number of an input file).
class Error : public std::runtime_error {
 public:
  static constexpr std::size_t kNoOffset = static_cast<std::size_t>(-1);

  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  static Error at_offset(ErrorCode code, const std::string& message,
                         std::size_t byte_offset) {
    Error e(code, message + " (byte offset " + std::to_string(byte_offset) + ")");
    e.offset_ = byte_offset;
    return e;
  }

  static Error at_line(ErrorCode code, const std::string& message, int line) {
    Error e(code, message + " (line " + std::to_string(line) + ")");
    e.line_ = line;
    return e;
  }

  ErrorCode code() const { return code_; }
  std::size_t offset() const { return offset_; }
  int line() const { return line_; }

 private:
  ErrorCode code_;
  std::size_t offset_ = kNoOffset;
  int line_ = -1;
};

}  // namespace spateval
