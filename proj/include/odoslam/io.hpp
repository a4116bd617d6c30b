#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "odoslam/frontend.hpp"
#include "odoslam/planarloc.hpp"
#include "odoslam/simworld.hpp"

namespace odoslam {

inline constexpr int kSimVersion = 1;

nlohmann::json run_to_json(const SimRun& run);
/// Throws kSchema or kVersion.
SimRun run_from_json(const nlohmann::json& j);
void save_run(const SimRun& run, const std::filesystem::path& path);
SimRun load_run(const std::filesystem::path& path);

/// Parses a JSON file; kIo when unreadable, kSchema when malformed.
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

struct TrackingRecord {
  double t = 0.0;
  TrackStatus status = TrackStatus::kTrackingVisual;
  Pose3 T_MB;  // body in the map frame
};

/// CSV "t,status,tx,ty,tz,qx,qy,qz,qw", 17 significant digits.
void write_tracking_log(const std::vector<TrackingRecord>& records, const std::filesystem::path& path);
std::vector<TrackingRecord> read_tracking_log(const std::filesystem::path& path);

/// CSV "t,source,map_x,map_y,map_yaw,corr_x,corr_y,corr_yaw".
void write_planar_log(const std::vector<LocalizationOutput>& outputs,
                      const std::filesystem::path& path);

}  // namespace odoslam
