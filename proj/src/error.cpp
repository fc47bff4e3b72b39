#include "whynot/error.hpp"

namespace whynot {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedMap: return "MalformedMap";
    case ErrorCode::MalformedLegend: return "MalformedLegend";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::NoGoal: return "NoGoal";
    case ErrorCode::NoStart: return "NoStart";
    case ErrorCode::StartOutOfRange: return "StartOutOfRange";
    case ErrorCode::SteppedWhenDone: return "SteppedWhenDone";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyTrajectory: return "EmptyTrajectory";
    case ErrorCode::MissingLexiconEntry: return "MissingLexiconEntry";
    case ErrorCode::NoStatesAboveThreshold: return "NoStatesAboveThreshold";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::AllExcluded: return "AllExcluded";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::MapHashMismatch: return "MapHashMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace whynot
