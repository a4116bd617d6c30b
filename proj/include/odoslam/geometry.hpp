#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <span>

namespace odoslam {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat26 = Eigen::Matrix<double, 2, 6>;

// Below this rotation angle the closed forms switch to Taylor expansions.
inline constexpr double kSmallAngle = 1e-8;
// log_se3 refuses rotations closer than this to pi.
inline constexpr double kSingularAngleMargin = 1e-6;

/// Minimal se(3) coordinates: translational part first, then rotation.
struct Twist6 {
  Vec3 rho = Vec3::Zero();
  Vec3 phi = Vec3::Zero();

  Vec6 vector() const {
    Vec6 v;
    v << rho, phi;
    return v;
  }
  static Twist6 from_vector(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }
};

/// Rigid transform T_AB: maps points expressed in frame B into frame A.
/// A keyframe's T_CW therefore takes world points into the camera frame.
class Pose3 {
 public:
  Pose3() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  Pose3(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static Pose3 identity() { return {}; }
  /// Quaternion is normalized on ingest.
  static Pose3 from_quaternion(const Eigen::Quaterniond& q, const Vec3& translation);
  /// tx ty tz qx qy qz qw
  static Pose3 from_seven(std::span<const double> values);
  std::array<double, 7> to_seven() const;

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Eigen::Quaterniond quaternion() const;
  Mat4 matrix() const;

  Pose3 inverse() const;
  Pose3 operator*(const Pose3& other) const {
    return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
  }
  Vec3 operator*(const Vec3& point) const { return rotation_ * point + translation_; }

  /// Re-orthonormalizes the rotation (SVD projection onto SO(3)).
  Pose3 renormalized() const;

  /// Bitwise equality of all twelve entries.
  friend bool operator==(const Pose3& a, const Pose3& b) {
    return a.rotation_ == b.rotation_ && a.translation_ == b.translation_;
  }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

inline Pose3 compose(const Pose3& a, const Pose3& b) { return a * b; }
inline Pose3 inverse(const Pose3& p) { return p.inverse(); }
/// inverse(a) * b: pose of b expressed in the frame of a.
inline Pose3 relative_pose(const Pose3& a, const Pose3& b) { return a.inverse() * b; }

Mat3 hat(const Vec3& v);
Vec3 vee(const Mat3& m);

Mat3 exp_so3(const Vec3& phi);
/// Throws kSingularRotation when the angle is within kSingularAngleMargin of pi.
Vec3 log_so3(const Mat3& rotation);
double rotation_angle(const Mat3& rotation);

Pose3 exp_se3(const Twist6& twist);
/// Throws kSingularRotation when the rotation angle is within
/// kSingularAngleMargin of pi.
Twist6 log_se3(const Pose3& pose);

/// Left Jacobian of SO(3) and its inverse.
Mat3 so3_left_jacobian(const Vec3& phi);
Mat3 so3_left_jacobian_inverse(const Vec3& phi);
/// Inverse of the SE(3) left Jacobian, ordering (rho, phi).
Mat6 se3_left_jacobian_inverse(const Twist6& twist);
/// Adjoint: exp(Ad(T) x) = T exp(x) T^-1.
Mat6 adjoint(const Pose3& pose);

/// Planar pose; yaw is kept in (-pi, pi].
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double yaw_);

  Pose2 operator*(const Pose2& other) const;
  Pose2 inverse() const;
  /// Planar pose lifted to SE(3) (z, roll, pitch zero).
  Pose3 to_pose3() const;
};

double wrap_angle(double angle);

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  double min_depth = 0.1;
  double max_depth = 20.0;

  /// 640x480 forehead camera with ~55 degree horizontal field of view.
  static CameraIntrinsics pepper_forehead();
  void validate() const;
  bool in_bounds(const Vec2& pixel) const {
    return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() < width && pixel.y() < height;
  }
  Vec3 unproject(const Vec2& pixel) const {
    return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy, 1.0};
  }
};

struct Projection {
  Vec2 pixel;
  bool in_bounds = false;
};

/// Pinhole projection. Throws kBehindCamera when p_cam.z < min_depth.
Projection project_point(const Vec3& p_cam, const CameraIntrinsics& camera);

/// Projection without the depth contract; callers check depth themselves.
inline Vec2 project_unchecked(const Vec3& p_cam, const CameraIntrinsics& camera) {
  return {camera.fx * p_cam.x() / p_cam.z() + camera.cx,
          camera.fy * p_cam.y() / p_cam.z() + camera.cy};
}

/// Camera center of a T_CW pose, in world coordinates.
inline Vec3 camera_center(const Pose3& T_CW) {
  return -T_CW.rotation().transpose() * T_CW.translation();
}

}  // namespace odoslam
