#include "odoslam/errors.hpp"

namespace odoslam {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kSingularRotation: return "singular rotation";
    case ErrorCode::kBehindCamera: return "behind camera";
    case ErrorCode::kInitializationRefused: return "initialization refused";
    case ErrorCode::kDegenerateMotion: return "degenerate motion";
    case ErrorCode::kInvalidState: return "invalid state";
    case ErrorCode::kNotFound: return "not found";
    case ErrorCode::kSchema: return "schema error";
    case ErrorCode::kVersion: return "version error";
    case ErrorCode::kIo: return "I/O error";
    case ErrorCode::kNoOverlap: return "no overlap";
    case ErrorCode::kDegenerateOrientation: return "degenerate orientation";
  }
  return "error";
}

}  // namespace odoslam
