#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace whynot {

enum class ErrorCode {
  MalformedMap,
  MalformedLegend,
  UnknownClass,
  NoGoal,
  NoStart,
  StartOutOfRange,
  SteppedWhenDone,
  IndexOutOfRange,
  EmptyTrajectory,
  MissingLexiconEntry,
  NoStatesAboveThreshold,
  TooFewSamples,
  AllExcluded,
  LengthMismatch,
  VersionMismatch,
  MapHashMismatch,
  CorruptFile,
  ValidationError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string field = {})
      : std::runtime_error(message), code_(code), field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  // Dotted path of the offending config field, empty when not applicable.
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

}  // namespace whynot
