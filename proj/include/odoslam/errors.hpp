#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace odoslam {

enum class ErrorCode {
  kConfig,
  kSingularRotation,
  kBehindCamera,
  kInitializationRefused,
  kDegenerateMotion,
  kInvalidState,
  kNotFound,
  kSchema,
  kVersion,
  kIo,
  kNoOverlap,
  kDegenerateOrientation,
};

std::string_view to_string(ErrorCode code);

/// Every recoverable failure in the library surfaces as this exception; the
/// code tells callers which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace odoslam
