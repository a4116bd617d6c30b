#pragma once

#include <optional>

#include "odoslam/geometry.hpp"

namespace odoslam {

/// Body pose in the SLAM world frame: T_WB = T_CW^-1 * T_BC^-1.
Pose3 camera_to_body(const Pose3& T_CW, const Pose3& T_BC);

/// Transform from the SLAM world frame (first camera) into the map frame, the
/// body frame of the first keyframe, whose z axis is vertical.
inline Pose3 map_from_world(const Pose3& T_BC) { return T_BC; }

/// Projects a pose onto the ground plane: yaw of the body x axis. Throws
/// kDegenerateOrientation when that axis is (nearly) vertical.
Pose2 planarize(const Pose3& pose);

/// The map->odom correction c with c * odom = body.
Pose2 compute_map_to_odom(const Pose2& body_in_map, const Pose2& odom_body);

enum class LocalizationSource { kVisual, kOdometryOnly };
const char* to_string(LocalizationSource source);

struct LocalizationOutput {
  double timestamp = 0.0;
  LocalizationSource source = LocalizationSource::kVisual;
  Pose2 body_in_map;
  Pose2 map_to_odom;
};

/// Keeps the last visual correction and applies it to odometry while vision
/// is unavailable.
class LocalizationPublisher {
 public:
  /// `T_MB` is the estimated body pose in the map frame, `odom_T_OB` the raw
  /// odometry reading of the same instant.
  LocalizationOutput update(double timestamp, const Pose3& T_MB, const Pose3& odom_T_OB,
                            LocalizationSource source);
  const std::optional<Pose2>& correction() const { return correction_; }

 private:
  std::optional<Pose2> correction_;
};

}  // namespace odoslam
