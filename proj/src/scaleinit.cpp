#include "odoslam/scaleinit.hpp"

#include <cmath>
#include <vector>

#include "odoslam/errors.hpp"

namespace odoslam {

ScaleEstimate estimate_scale(std::span<const Keyframe> keyframes, const Pose3& T_BC) {
  if (keyframes.size() < 2) throw Error(ErrorCode::kInvalidState, "scale needs two keyframes");
  double metric = 0.0;
  double visual = 0.0;
  for (std::size_t i = 1; i < keyframes.size(); ++i) {
    const Vec3 m0 = (keyframes[i - 1].odom_T_OB * T_BC).translation();
    const Vec3 m1 = (keyframes[i].odom_T_OB * T_BC).translation();
    const Vec3 dv = camera_center(keyframes[i].T_CW) - camera_center(keyframes[i - 1].T_CW);
    metric += (m1 - m0).squaredNorm();
    visual += dv.squaredNorm();
  }
  if (std::sqrt(visual) < 1e-6) {
    throw Error(ErrorCode::kDegenerateMotion, "visual path too short to recover scale");
  }
  if (std::sqrt(metric) < 1e-6) {
    throw Error(ErrorCode::kDegenerateMotion, "odometry path too short to recover scale");
  }
  const double s = std::sqrt(metric) / std::sqrt(visual);
  return {s, static_cast<int>(keyframes.size())};
}

ScaleEstimate estimate_scale(const MapState& map) {
  std::vector<Keyframe> kfs;
  for (const auto& [id, kf] : map.keyframes) kfs.push_back(kf);
  return estimate_scale(kfs, map.T_BC);
}

MapState apply_scale(const MapState& map, double s) {
  if (!map.unscaled) throw Error(ErrorCode::kInvalidState, "map already metric");
  if (!(s > 0.0)) throw Error(ErrorCode::kConfig, "scale must be positive");
  MapState out = map;
  for (auto& [id, kf] : out.keyframes) kf.T_CW = Pose3(kf.T_CW.rotation(), kf.T_CW.translation() * s);
  for (auto& [id, lm] : out.landmarks) lm.position *= s;
  out.unscaled = false;
  return out;
}

}  // namespace odoslam
