#pragma once

#include <filesystem>
#include <fstream>
#include <system_error>

#include "odoslam/errors.hpp"

namespace odoslam {

// Opens `path` for writing, creating missing parent directories.
inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

}  // namespace odoslam
