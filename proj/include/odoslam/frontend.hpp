#pragma once

#include <set>
#include <vector>

#include "odoslam/backend.hpp"
#include "odoslam/geometry.hpp"
#include "odoslam/map.hpp"
#include "odoslam/simworld.hpp"

namespace odoslam {

enum class TrackStatus { kUninitialized, kTrackingVisual, kOdometryOnly, kLost };

const char* to_string(TrackStatus status);
/// Throws kSchema for unknown names.
TrackStatus track_status_from_string(const std::string& name);

struct TrackState {
  TrackStatus status = TrackStatus::kUninitialized;
  double timestamp = 0.0;
  Pose3 T_CW;
  Pose3 odom_T_OB;  // odometry reading of the frame T_CW belongs to
  int inlier_count = 0;
  std::vector<int> inlier_ids;
};

struct TrackerOptions {
  double pixel_sigma = 1.0;
  double chi2_gate = kChi2Gate2Dof;
  double huber_delta = 2.447651936;
  int min_inliers = 15;
  int max_iterations = 10;
};

/// Motion prior T_CW_k = (T_BC^-1 * dOdom * T_BC)^-1 * T_CW_{k-1}. Before the
/// metric scale is known the odometry translation is multiplied by
/// `map_units_per_meter`.
Pose3 predict_from_odometry(const Pose3& prev_T_CW, const Pose3& odom_prev, const Pose3& odom_curr,
                            const Pose3& T_BC, double map_units_per_meter = 1.0);

struct PoseEstimate {
  Pose3 T_CW;
  int inlier_count = 0;
  std::vector<int> inlier_ids;
  bool success = false;
};

/// Robust (Huber) Gauss-Newton pose refinement against mapped landmarks,
/// starting from `seed`. Observations are re-classified every iteration with
/// the chi-square gate; success needs `min_inliers` inliers.
PoseEstimate refine_pose(const MapState& map, const std::vector<Observation>& observations,
                         const Pose3& seed, const TrackerOptions& options,
                         const std::set<int>* usable_landmarks = nullptr);

/// Tracks one frame from the odometry prediction. On failure the reported
/// pose is the prediction, status OdometryOnly once the map is metric and
/// Lost before that.
TrackState track_frame(const MapState& map, const Frame& frame, const TrackState& previous,
                       const TrackerOptions& options, double map_units_per_meter = 1.0,
                       const std::set<int>* usable_landmarks = nullptr);

struct InitializerOptions {
  int min_shared = 20;
  double min_median_parallax_deg = 1.0;
  double min_median_disparity_px = 2.0;
  double pixel_sigma = 1.0;
  double chi2_gate = kChi2Gate2Dof;
  int min_landmarks = 20;
};

struct InitializationResult {
  MapState map;  // keyframes 0 and 1, unscaled, median depth of kf 0 equal to 1
  SolveReport report;
  double median_parallax_deg = 0.0;
};

/// Two-view initialization: essential matrix from the eight-point algorithm,
/// cheirality-checked decomposition, triangulation and a two-view bundle
/// adjustment with the first keyframe fixed. Throws kInitializationRefused on
/// too few shared observations, too little parallax or failed refinement.
InitializationResult initialize_two_view(const Frame& first, const Frame& second,
                                         const CameraIntrinsics& camera, const Pose3& T_BC,
                                         const InitializerOptions& options = {});

/// Essential matrix E with x_b^T E x_a = 0 for normalized image coordinates.
Mat3 estimate_essential(const std::vector<Vec2>& xa, const std::vector<Vec2>& xb);

/// The decomposition of E (X_b = R X_a + t) putting most points in front of
/// both cameras; |t| = 1.
Pose3 decompose_essential(const Mat3& E, const std::vector<Vec2>& xa, const std::vector<Vec2>& xb);

struct KeyframePolicy {
  double min_translation = 0.3;  // meters of odometry travel since the last keyframe
  double min_rotation = 0.25;    // radians of odometry rotation
  double min_tracked_ratio = 0.7;
};

/// Insert when the frame tracked visually and either moved far enough (per
/// odometry) from the last keyframe or tracks clearly fewer landmarks than
/// the last keyframe holds.
bool decide_keyframe(const TrackState& state, const Pose3& last_kf_odom, int last_kf_landmarks,
                     const KeyframePolicy& policy);

}  // namespace odoslam
