#include "odoslam/planarloc.hpp"

#include <cmath>

#include "odoslam/errors.hpp"

namespace odoslam {

Pose3 camera_to_body(const Pose3& T_CW, const Pose3& T_BC) {
  return T_CW.inverse() * T_BC.inverse();
}

Pose2 planarize(const Pose3& pose) {
  const Vec3 x_axis = pose.rotation().col(0);
  if (std::hypot(x_axis.x(), x_axis.y()) < 1e-6) {
    throw Error(ErrorCode::kDegenerateOrientation, "body x axis is vertical");
  }
  return {pose.translation().x(), pose.translation().y(), std::atan2(x_axis.y(), x_axis.x())};
}

Pose2 compute_map_to_odom(const Pose2& body_in_map, const Pose2& odom_body) {
  return body_in_map * odom_body.inverse();
}

const char* to_string(LocalizationSource source) {
  return source == LocalizationSource::kVisual ? "visual" : "odometry";
}

LocalizationOutput LocalizationPublisher::update(double timestamp, const Pose3& T_MB,
                                                 const Pose3& odom_T_OB, LocalizationSource source) {
  const Pose2 odom = planarize(odom_T_OB);
  LocalizationOutput out;
  out.timestamp = timestamp;
  out.source = source;
  if (source == LocalizationSource::kVisual || !correction_) {
    out.body_in_map = planarize(T_MB);
    correction_ = compute_map_to_odom(out.body_in_map, odom);
  } else {
    out.body_in_map = *correction_ * odom;
  }
  out.map_to_odom = *correction_;
  return out;
}

}  // namespace odoslam
