#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "odoslam/backend.hpp"
#include "odoslam/frontend.hpp"
#include "odoslam/map.hpp"

namespace odoslam {

inline constexpr int kMapVersion = 1;

enum class Mode { kSlam, kLocalizationOnly, kContinueMapping };
const char* to_string(Mode mode);
/// "slam", "localization-only", "continue-mapping"; throws kConfig otherwise.
Mode mode_from_string(const std::string& name);

nlohmann::json pose_to_json(const Pose3& pose);
/// Accepts {"pose": [tx ty tz qx qy qz qw]} with an optional exact row-major
/// "R"; throws kSchema on malformed input.
Pose3 pose_from_json(const nlohmann::json& j);

nlohmann::json map_to_json(const MapState& map);
MapState map_from_json(const nlohmann::json& j);

/// Throws kInvalidState for an unscaled map and kIo on write failure.
void save_map(const MapState& map, const std::filesystem::path& path);
/// Throws kIo, kSchema or kVersion.
MapState load_map(const std::filesystem::path& path);

/// FNV-1a over the canonical serialization; equal maps give equal sums.
std::uint64_t map_checksum(const MapState& map);

/// |a ∩ b| / |a ∪ b| of two sorted id lists.
double jaccard(const std::vector<int>& a, const std::vector<int>& b);
std::vector<int> signature(const std::vector<Observation>& observations);

struct RelocalizationOptions {
  double min_overlap = 0.2;
  int max_candidates = 3;
  TrackerOptions tracker;
};

struct RelocalizationResult {
  bool success = false;
  int keyframe_id = -1;
  double overlap = 0.0;
  PoseEstimate estimate;
};

/// Place recognition on observation-id signatures, then pose refinement from
/// the best-matching keyframes' poses.
RelocalizationResult relocalize(const MapState& map, const Frame& frame,
                                const RelocalizationOptions& options);

struct LoopOptions {
  double min_overlap = 0.2;
  int min_keyframe_gap = 10;
  int recent_keyframes = 5;
  double pixel_sigma = 1.0;
  double chi2_gate = kChi2Gate2Dof;
};

struct LoopClosureResult {
  bool closed = false;
  int candidate = -1;
  double overlap = 0.0;
  int new_links = 0;
  SolveReport report;
};

/// Looks for an older, non-covisible keyframe whose signature overlaps the new
/// one; on a hit, re-associates the mapped landmarks both neighborhoods see
/// and runs a global bundle adjustment.
LoopClosureResult detect_and_close_loop(MapState& map, int new_kf, const InformationMatrices& info,
                                        const BaOptions& ba, const LoopOptions& options);

}  // namespace odoslam
