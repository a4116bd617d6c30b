#include "odoslam/frontend.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "odoslam/errors.hpp"

namespace odoslam {

const char* to_string(TrackStatus status) {
  switch (status) {
    case TrackStatus::kUninitialized: return "Uninitialized";
    case TrackStatus::kTrackingVisual: return "TrackingVisual";
    case TrackStatus::kOdometryOnly: return "OdometryOnly";
    case TrackStatus::kLost: return "Lost";
  }
  return "?";
}

TrackStatus track_status_from_string(const std::string& name) {
  for (auto s : {TrackStatus::kUninitialized, TrackStatus::kTrackingVisual,
                 TrackStatus::kOdometryOnly, TrackStatus::kLost}) {
    if (name == to_string(s)) return s;
  }
  throw Error(ErrorCode::kSchema, "unknown tracking status '" + name + "'");
}

Pose3 predict_from_odometry(const Pose3& prev_T_CW, const Pose3& odom_prev, const Pose3& odom_curr,
                            const Pose3& T_BC, double map_units_per_meter) {
  Pose3 step = odometry_camera_increment(odom_prev, odom_curr, T_BC);
  if (map_units_per_meter != 1.0) {
    step = Pose3(step.rotation(), step.translation() * map_units_per_meter);
  }
  return step.inverse() * prev_T_CW;
}

namespace {

struct Correspondence {
  int id;
  Vec3 point;
  Vec2 pixel;
};

constexpr double kMinDepth = 1e-6;

}  // namespace

PoseEstimate refine_pose(const MapState& map, const std::vector<Observation>& observations,
                         const Pose3& seed, const TrackerOptions& options,
                         const std::set<int>* usable_landmarks) {
  PoseEstimate out;
  out.T_CW = seed;
  std::vector<Correspondence> corr;
  for (const auto& o : observations) {
    if (usable_landmarks != nullptr && !usable_landmarks->count(o.landmark_id)) continue;
    const auto it = map.landmarks.find(o.landmark_id);
    if (it == map.landmarks.end()) continue;
    corr.push_back({o.landmark_id, it->second.position, o.pixel});
  }
  if (static_cast<int>(corr.size()) < options.min_inliers) return out;

  const double inv_var = 1.0 / (options.pixel_sigma * options.pixel_sigma);
  const double gate = options.chi2_gate;
  std::vector<char> inlier(corr.size(), 1);
  Pose3 T = seed;

  const auto classify = [&](const Pose3& pose) {
    int n = 0;
    for (std::size_t i = 0; i < corr.size(); ++i) {
      const Vec3 pc = pose * corr[i].point;
      bool ok = pc.z() > kMinDepth;
      if (ok) ok = (project_unchecked(pc, map.camera) - corr[i].pixel).squaredNorm() * inv_var <= gate;
      inlier[i] = ok;
      n += ok;
    }
    return n;
  };

  // A few rounds: robust solve, re-classify, solve again on the inliers.
  constexpr int kRounds = 4;
  for (int round = 0; round < kRounds; ++round) {
    for (int it = 0; it < options.max_iterations; ++it) {
      Mat6 H = Mat6::Zero();
      Vec6 g = Vec6::Zero();
      int used = 0;
      for (std::size_t i = 0; i < corr.size(); ++i) {
        if (round > 0 && !inlier[i]) continue;
        const auto lin = linearize_reprojection(T, corr[i].point, corr[i].pixel, map.camera);
        if (!(lin.depth > kMinDepth)) continue;
        const double chi2 = lin.residual.squaredNorm() * inv_var;
        const double w = chi2 <= options.huber_delta * options.huber_delta
                             ? 1.0
                             : options.huber_delta / std::sqrt(chi2);
        H += w * inv_var * lin.d_pose.transpose() * lin.d_pose;
        g += w * inv_var * lin.d_pose.transpose() * lin.residual;
        ++used;
      }
      if (used < 3) break;
      Eigen::LDLT<Mat6> ldlt(H);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
      const Vec6 dx = -ldlt.solve(g);
      if (!dx.allFinite()) break;
      T = exp_se3(Twist6::from_vector(dx)) * T;
      if (dx.norm() < 1e-10) break;
    }
    classify(T);
  }
  const int n = classify(T);
  out.T_CW = T.renormalized();
  out.inlier_count = n;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (inlier[i]) out.inlier_ids.push_back(corr[i].id);
  }
  out.success = n >= options.min_inliers;
  return out;
}

TrackState track_frame(const MapState& map, const Frame& frame, const TrackState& previous,
                       const TrackerOptions& options, double map_units_per_meter,
                       const std::set<int>* usable_landmarks) {
  if (previous.status == TrackStatus::kUninitialized) {
    throw Error(ErrorCode::kInvalidState, "tracking needs an initialized map");
  }
  TrackState next;
  next.timestamp = frame.timestamp;
  next.odom_T_OB = frame.odometry_pose;
  const Pose3 prediction = predict_from_odometry(previous.T_CW, previous.odom_T_OB,
                                                 frame.odometry_pose, map.T_BC, map_units_per_meter);
  PoseEstimate est;
  if (!frame.observations.empty()) {
    est = refine_pose(map, frame.observations, prediction, options, usable_landmarks);
  }
  if (est.success) {
    next.status = TrackStatus::kTrackingVisual;
    next.T_CW = est.T_CW;
    next.inlier_count = est.inlier_count;
    next.inlier_ids = std::move(est.inlier_ids);
  } else {
    next.status = map.unscaled ? TrackStatus::kLost : TrackStatus::kOdometryOnly;
    next.T_CW = prediction;
  }
  return next;
}

Mat3 estimate_essential(const std::vector<Vec2>& xa, const std::vector<Vec2>& xb) {
  if (xa.size() != xb.size() || xa.size() < 8) {
    throw Error(ErrorCode::kInitializationRefused, "eight-point needs 8 correspondences");
  }
  Eigen::MatrixXd A(xa.size(), 9);
  for (std::size_t k = 0; k < xa.size(); ++k) {
    const Vec3 a(xa[k].x(), xa[k].y(), 1.0);
    const Vec3 b(xb[k].x(), xb[k].y(), 1.0);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) A(k, 3 * i + j) = b(i) * a(j);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd e = svd.matrixV().col(8);
  Mat3 E;
  E << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  Eigen::JacobiSVD<Mat3> se(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double s = 0.5 * (se.singularValues()(0) + se.singularValues()(1));
  return se.matrixU() * Vec3(s, s, 0.0).asDiagonal() * se.matrixV().transpose();
}

namespace {

// Ray midpoint in frame A for camera B at X_b = R X_a + t.
Vec3 triangulate_pair(const Pose3& T_BA, const Vec2& xa, const Vec2& xb) {
  const Vec3 da(xa.x(), xa.y(), 1.0);
  const Vec3 db = T_BA.rotation().transpose() * Vec3(xb.x(), xb.y(), 1.0);
  const Vec3 cb = camera_center(T_BA);
  return triangulate_midpoint(Vec3::Zero(), da.normalized(), cb, db.normalized());
}

}  // namespace

Pose3 decompose_essential(const Mat3& E, const std::vector<Vec2>& xa, const std::vector<Vec2>& xb) {
  Eigen::JacobiSVD<Mat3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  Mat3 V = svd.matrixV();
  if (U.determinant() < 0) U = -U;
  if (V.determinant() < 0) V = -V;
  Mat3 W;
  W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Mat3 R1 = U * W * V.transpose();
  const Mat3 R2 = U * W.transpose() * V.transpose();
  const Vec3 t = U.col(2);
  const Pose3 candidates[4] = {{R1, t}, {R1, -t}, {R2, t}, {R2, -t}};
  int best = -1;
  int best_count = -1;
  for (int c = 0; c < 4; ++c) {
    int count = 0;
    for (std::size_t k = 0; k < xa.size(); ++k) {
      Vec3 X;
      try {
        X = triangulate_pair(candidates[c], xa[k], xb[k]);
      } catch (const Error&) {
        continue;
      }
      if (X.z() > 0.0 && (candidates[c] * X).z() > 0.0) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best = c;
    }
  }
  return candidates[best];
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<long>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

[[noreturn]] void refuse(const std::string& why) {
  throw Error(ErrorCode::kInitializationRefused, why);
}

}  // namespace

InitializationResult initialize_two_view(const Frame& first, const Frame& second,
                                         const CameraIntrinsics& camera, const Pose3& T_BC,
                                         const InitializerOptions& options) {
  std::vector<int> ids;
  std::vector<Vec2> pa, pb, xa, xb;
  std::vector<double> disparity;
  {
    auto a = first.observations.begin();
    auto b = second.observations.begin();
    while (a != first.observations.end() && b != second.observations.end()) {
      if (a->landmark_id < b->landmark_id) {
        ++a;
      } else if (b->landmark_id < a->landmark_id) {
        ++b;
      } else {
        ids.push_back(a->landmark_id);
        pa.push_back(a->pixel);
        pb.push_back(b->pixel);
        xa.push_back(camera.unproject(a->pixel).head<2>());
        xb.push_back(camera.unproject(b->pixel).head<2>());
        disparity.push_back((a->pixel - b->pixel).norm());
        ++a;
        ++b;
      }
    }
  }
  if (static_cast<int>(ids.size()) < options.min_shared) refuse("too few shared observations");
  if (median(disparity) < options.min_median_disparity_px) refuse("frames barely differ");

  const Mat3 E = estimate_essential(xa, xb);
  const Pose3 T_BA = decompose_essential(E, xa, xb);

  InitializationResult result;
  MapState& map = result.map;
  map.camera = camera;
  map.T_BC = T_BC;
  map.unscaled = true;
  Keyframe k0{0, first.timestamp, Pose3::identity(), first.odometry_pose, 0, first.observations};
  Keyframe k1{1, second.timestamp, T_BA, second.odometry_pose, 0, second.observations};

  const double min_point_parallax = 0.25 * std::numbers::pi / 180.0;
  std::vector<double> parallax;
  const Vec3 cb = camera_center(T_BA);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    Vec3 X;
    try {
      X = triangulate_pair(T_BA, xa[k], xb[k]);
    } catch (const Error&) {
      continue;
    }
    if (!(X.z() > 0.0) || !((T_BA * X).z() > 0.0)) continue;
    const double ang = std::acos(std::clamp(X.normalized().dot((X - cb).normalized()), -1.0, 1.0));
    parallax.push_back(ang);
    if (ang < min_point_parallax) continue;
    map.landmarks.emplace(ids[k], MapLandmark{ids[k], X, {0, 1}});
  }
  result.median_parallax_deg = median(parallax) * 180.0 / std::numbers::pi;
  if (result.median_parallax_deg < options.min_median_parallax_deg) refuse("insufficient parallax");
  if (static_cast<int>(map.landmarks.size()) < options.min_landmarks) refuse("too few points");

  map.keyframes.emplace(0, std::move(k0));
  map.keyframes.emplace(1, std::move(k1));
  map.rebuild_covisibility();

  LocalWindow window;
  window.active_keyframes = {1};
  window.fixed_keyframes = {0};
  for (const auto& [id, lm] : map.landmarks) window.active_landmarks.insert(id);
  BaOptions ba;
  ba.use_odometry = false;
  const auto info = InformationMatrices::from_sigmas(options.pixel_sigma, 1.0, 1.0);
  result.report = bundle_adjust(map, window, info, ba);
  if (result.report.status == "failed") refuse("two-view refinement failed");

  // Fix the free scale: median landmark depth in the first camera becomes 1.
  std::vector<double> depths;
  for (const auto& [id, lm] : map.landmarks) depths.push_back(lm.position.z());
  const double med = median(depths);
  if (!(med > 0.0)) refuse("points behind the first camera");
  const double s = 1.0 / med;
  for (auto& [id, lm] : map.landmarks) lm.position *= s;
  Keyframe& kf1 = map.keyframe(1);
  kf1.T_CW = Pose3(kf1.T_CW.rotation(), kf1.T_CW.translation() * s);

  std::set<int> all;
  for (const auto& [id, lm] : map.landmarks) all.insert(id);
  remove_outlier_observations(map, all, options.pixel_sigma, options.chi2_gate);
  if (static_cast<int>(map.landmarks.size()) < options.min_landmarks) refuse("too few inliers");
  map.rebuild_covisibility();
  return result;
}

bool decide_keyframe(const TrackState& state, const Pose3& last_kf_odom, int last_kf_landmarks,
                     const KeyframePolicy& policy) {
  if (state.status != TrackStatus::kTrackingVisual) return false;
  const Pose3 motion = relative_pose(last_kf_odom, state.odom_T_OB);
  if (motion.translation().norm() > policy.min_translation) return true;
  if (rotation_angle(motion.rotation()) > policy.min_rotation) return true;
  return last_kf_landmarks > 0 &&
         state.inlier_count < policy.min_tracked_ratio * static_cast<double>(last_kf_landmarks);
}

}  // namespace odoslam
