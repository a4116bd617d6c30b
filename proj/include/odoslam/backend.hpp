#pragma once

#include <set>
#include <string>
#include <vector>

#include "odoslam/geometry.hpp"
#include "odoslam/map.hpp"

namespace odoslam {

inline constexpr double kChi2Gate2Dof = 5.991;

/// Fixed weights of the joint problem.
struct InformationMatrices {
  Mat2 omega_vis = Mat2::Identity();
  Mat6 omega_odo = Mat6::Identity();

  /// omega_vis = I / pixel_sigma^2; omega_odo = diag(1/trans_sigma^2 (x3),
  /// 1/rot_sigma^2 (x3)), sigmas being the expected odometry error over one
  /// keyframe interval.
  static InformationMatrices from_sigmas(double pixel_sigma, double trans_sigma, double rot_sigma);
  void validate() const;
};

struct LocalWindow {
  std::set<int> active_keyframes;
  std::set<int> fixed_keyframes;
  std::set<int> active_landmarks;
};

/// Active: kf plus covisibility neighbors with weight >= min_weight. Fixed:
/// keyframes outside that set observing any active landmark.
LocalWindow select_local_window(const MapState& map, int kf_id, int min_weight = 15);

/// Camera-frame relative motion between two odometry readings, T_{C_prev C_curr}.
Pose3 odometry_camera_increment(const Pose3& odom_prev, const Pose3& odom_curr, const Pose3& T_BC);

/// log(T_rel^-1 * T_prev_CW * T_curr_CW^-1). Throws kSingularRotation.
Twist6 odometry_residual(const Pose3& T_rel_odo, const Pose3& T_prev_CW, const Pose3& T_curr_CW);

struct OdometryLinearization {
  Vec6 residual;
  Mat6 d_prev;  // w.r.t. left perturbation exp(d) * T_prev_CW
  Mat6 d_curr;  // w.r.t. left perturbation exp(d) * T_curr_CW
};
OdometryLinearization linearize_odometry(const Pose3& T_rel_odo, const Pose3& T_prev_CW,
                                         const Pose3& T_curr_CW);

/// project(T_CW * landmark) - pixel. Throws kBehindCamera.
Vec2 reprojection_residual(const Pose3& T_CW, const Vec3& landmark, const Vec2& pixel,
                           const CameraIntrinsics& camera);

struct ReprojectionLinearization {
  Vec2 residual;
  Mat26 d_pose;   // w.r.t. left perturbation exp(d) * T_CW
  Mat23 d_point;  // w.r.t. the world point
  double depth = 0.0;
};
/// No depth contract; check `depth` before trusting the result.
ReprojectionLinearization linearize_reprojection(const Pose3& T_CW, const Vec3& landmark,
                                                 const Vec2& pixel, const CameraIntrinsics& camera);

struct BaOptions {
  int max_iterations = 20;
  double min_relative_decrease = 1e-6;
  double huber_delta = 2.447651936;  // sqrt(5.991)
  bool use_odometry = true;
  double initial_lambda = 1e-4;
  int max_lambda_increases = 10;
  // Points closer than this (map units) count as behind the camera.
  double min_depth = 1e-6;
};

struct SolveReport {
  int kf_id = -1;
  int n_active = 0;
  int n_fixed = 0;
  int n_landmarks = 0;
  int n_visual = 0;
  int n_odometry = 0;
  int dropped_odometry = 0;
  double cost0 = 0.0;
  double cost1 = 0.0;
  int iters = 0;
  std::string status = "converged";  // converged | max_iterations | failed
  std::vector<double> accepted_costs;
  // Observations excluded because the point sat behind the camera.
  std::vector<std::pair<int, int>> behind_camera;  // (kf id, landmark id)
};

/// Levenberg-Marquardt over active keyframe poses and active landmarks;
/// Huber-robust reprojection terms plus odometry terms between consecutive
/// keyframes of a session. Consecutive partners missing from the window are
/// held fixed. Throws kInvalidState when odometry factors are requested on an
/// unscaled map or the window has no active keyframe.
SolveReport bundle_adjust(MapState& map, const LocalWindow& window, const InformationMatrices& info,
                          const BaOptions& options);

/// All keyframes active except the first one, which fixes the gauge.
SolveReport global_bundle_adjust(MapState& map, const InformationMatrices& info,
                                 const BaOptions& options);

/// Robust (Huber) visual cost plus odometry cost over the given window.
double window_cost(const MapState& map, const LocalWindow& window, const InformationMatrices& info,
                   const BaOptions& options);

struct TriangulationOptions {
  double min_parallax_deg = 1.0;
  double pixel_sigma = 1.0;
  double chi2_gate = kChi2Gate2Dof;
  int recent_keyframes = 5;
  double min_depth = 1e-6;
};

/// Midpoint of the closest approach of two rays (origins, unit directions).
Vec3 triangulate_midpoint(const Vec3& origin_a, const Vec3& dir_a, const Vec3& origin_b,
                          const Vec3& dir_b);

/// Gauss-Newton refinement of a point over its observations.
Vec3 refine_point(const Vec3& initial, const std::vector<std::pair<Pose3, Vec2>>& views,
                  const CameraIntrinsics& camera, int iterations = 6);

/// Adds landmarks seen by new_kf and by at least one covisible (or recent)
/// keyframe but missing from the map. Returns the number added.
int triangulate_new_points(MapState& map, int new_kf, const TriangulationOptions& options);

/// Keyframes considered "nearby" for new_kf: covisibility neighbors plus the
/// few keyframes created just before it.
std::set<int> keyframe_neighborhood(const MapState& map, int kf_id, int recent);

/// Associates raw observations of new_kf with mapped landmarks already
/// observed inside its neighborhood, when the reprojection passes the gate.
int fuse_observations(MapState& map, int kf_id, const std::set<int>& neighborhood,
                      double pixel_sigma, double chi2_gate);

/// Drops observer links whose reprojection fails the gate (or whose point is
/// behind the camera) for the given landmarks, then culls landmarks left with
/// fewer than two observers. Returns the number of links removed.
int remove_outlier_observations(MapState& map, const std::set<int>& landmark_ids,
                                double pixel_sigma, double chi2_gate, double min_depth = 1e-6);

}  // namespace odoslam
