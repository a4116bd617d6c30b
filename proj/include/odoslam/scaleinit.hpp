#pragma once

#include <span>

#include "odoslam/map.hpp"

namespace odoslam {

struct ScaleEstimate {
  double scale = 1.0;  // meters per map unit
  int keyframes_used = 0;
};

/// Ratio of path lengths over consecutive keyframes,
/// s = sqrt(sum |dp_metric|^2) / sqrt(sum |dp_visual|^2), with dp_metric the
/// camera displacement implied by odometry through T_BC. Throws kInvalidState
/// with fewer than two keyframes and kDegenerateMotion when either path is
/// (nearly) zero.
ScaleEstimate estimate_scale(std::span<const Keyframe> keyframes, const Pose3& T_BC);
ScaleEstimate estimate_scale(const MapState& map);

/// Copy of the map with every keyframe translation and landmark multiplied by
/// s; the result is flagged metric. Throws kInvalidState if the map is metric
/// already and kConfig for a non-positive scale.
MapState apply_scale(const MapState& map, double s);

}  // namespace odoslam
