#include "odoslam/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/SVD>

#include "odoslam/errors.hpp"

namespace odoslam {
namespace {

constexpr double kSeriesAngle = 1e-2;

// (1 - cos t) / t^2 without cancellation.
double coeff_one_minus_cos(double theta) {
  const double s = std::sin(0.5 * theta) / (0.5 * theta);
  return 0.5 * s * s;
}

// (t - sin t) / t^3
double coeff_t_minus_sin(double theta) {
  if (theta < kSeriesAngle) {
    const double t2 = theta * theta;
    return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  }
  return (theta - std::sin(theta)) / (theta * theta * theta);
}

// (t^2/2 + cos t - 1) / t^4
double coeff_quartic(double theta) {
  if (theta < kSeriesAngle) {
    const double t2 = theta * theta;
    return 1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0;
  }
  const double t2 = theta * theta;
  return (0.5 * t2 + std::cos(theta) - 1.0) / (t2 * t2);
}

// (t - sin t - t^3/6) / t^5
double coeff_quintic(double theta) {
  if (theta < kSeriesAngle) {
    const double t2 = theta * theta;
    return -1.0 / 120.0 + t2 / 5040.0 - t2 * t2 / 362880.0;
  }
  const double t2 = theta * theta;
  return (theta - std::sin(theta) - theta * t2 / 6.0) / (t2 * t2 * theta);
}

}  // namespace

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Mat3 exp_so3(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = hat(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + K + 0.5 * K * K;
  }
  return Mat3::Identity() + (std::sin(theta) / theta) * K + coeff_one_minus_cos(theta) * K * K;
}

double rotation_angle(const Mat3& rotation) {
  const double c = 0.5 * (rotation.trace() - 1.0);
  const double s = 0.5 * vee(rotation - rotation.transpose()).norm();
  return std::atan2(s, c);
}

Vec3 log_so3(const Mat3& rotation) {
  const Vec3 v = 0.5 * vee(rotation - rotation.transpose());
  const double s = v.norm();
  const double c = 0.5 * (rotation.trace() - 1.0);
  const double theta = std::atan2(s, c);
  if (theta > std::numbers::pi - kSingularAngleMargin) {
    throw Error(ErrorCode::kSingularRotation,
                "rotation angle " + std::to_string(theta) + " too close to pi");
  }
  if (theta < kSmallAngle) {
    return v;
  }
  return (theta / s) * v;
}

Mat3 so3_left_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = hat(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + 0.5 * K + (1.0 / 6.0) * K * K;
  }
  return Mat3::Identity() + coeff_one_minus_cos(theta) * K + coeff_t_minus_sin(theta) * K * K;
}

Mat3 so3_left_jacobian_inverse(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = hat(phi);
  double c;
  if (theta < kSeriesAngle) {
    const double t2 = theta * theta;
    c = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    c = 1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Mat3::Identity() - 0.5 * K + c * K * K;
}

Mat6 se3_left_jacobian_inverse(const Twist6& twist) {
  const double theta = twist.phi.norm();
  const Mat3 P = hat(twist.phi);
  const Mat3 Rh = hat(twist.rho);
  const Mat3 PR = P * Rh;
  const Mat3 RP = Rh * P;
  const Mat3 PRP = PR * P;
  const double a = coeff_t_minus_sin(theta);
  const double b = coeff_quartic(theta);
  const double c = 0.5 * (b + 3.0 * coeff_quintic(theta));
  const Mat3 Q = 0.5 * Rh + a * (PR + RP + PRP) + b * (P * PR + RP * P - 3.0 * PRP) +
                 c * (PRP * P + P * PRP);
  const Mat3 Jinv = so3_left_jacobian_inverse(twist.phi);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = Jinv;
  out.topRightCorner<3, 3>() = -Jinv * Q * Jinv;
  out.bottomRightCorner<3, 3>() = Jinv;
  return out;
}

Mat6 adjoint(const Pose3& pose) {
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = pose.rotation();
  out.topRightCorner<3, 3>() = hat(pose.translation()) * pose.rotation();
  out.bottomRightCorner<3, 3>() = pose.rotation();
  return out;
}

Pose3 exp_se3(const Twist6& twist) {
  return {exp_so3(twist.phi), so3_left_jacobian(twist.phi) * twist.rho};
}

Twist6 log_se3(const Pose3& pose) {
  const Vec3 phi = log_so3(pose.rotation());
  return {so3_left_jacobian_inverse(phi) * pose.translation(), phi};
}

Pose3 Pose3::from_quaternion(const Eigen::Quaterniond& q, const Vec3& translation) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::kSchema, "quaternion has zero or non-finite norm");
  }
  return {Eigen::Quaterniond(q.coeffs() / n).toRotationMatrix(), translation};
}

Pose3 Pose3::from_seven(std::span<const double> values) {
  if (values.size() != 7) {
    throw Error(ErrorCode::kSchema, "pose needs 7 numbers, got " + std::to_string(values.size()));
  }
  const Eigen::Quaterniond q(values[6], values[3], values[4], values[5]);
  return from_quaternion(q, Vec3(values[0], values[1], values[2]));
}

std::array<double, 7> Pose3::to_seven() const {
  Eigen::Quaterniond q = quaternion();
  // Canonical hemisphere keeps serialized output stable.
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return {translation_.x(), translation_.y(), translation_.z(), q.x(), q.y(), q.z(), q.w()};
}

Eigen::Quaterniond Pose3::quaternion() const { return Eigen::Quaterniond(rotation_).normalized(); }

Mat4 Pose3::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Pose3 Pose3::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_)};
}

Pose3 Pose3::renormalized() const {
  Eigen::JacobiSVD<Mat3> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return {r, translation_};
}

double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

Pose2::Pose2(double x_, double y_, double yaw_) : x(x_), y(y_), yaw(wrap_angle(yaw_)) {}

Pose2 Pose2::operator*(const Pose2& other) const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {x + c * other.x - s * other.y, y + s * other.x + c * other.y, yaw + other.yaw};
}

Pose2 Pose2::inverse() const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {-(c * x + s * y), s * x - c * y, -yaw};
}

Pose3 Pose2::to_pose3() const {
  return {Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(), Vec3(x, y, 0.0)};
}

CameraIntrinsics CameraIntrinsics::pepper_forehead() {
  CameraIntrinsics k;
  k.width = 640;
  k.height = 480;
  k.fx = 320.0 / std::tan(0.5 * 55.0 * std::numbers::pi / 180.0);
  k.fy = k.fx;
  k.cx = 320.0;
  k.cy = 240.0;
  k.min_depth = 0.1;
  k.max_depth = 20.0;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::kConfig, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kConfig, "image size must be positive");
  if (!(min_depth > 0.0) || !(min_depth < max_depth)) {
    throw Error(ErrorCode::kConfig, "need 0 < min_depth < max_depth");
  }
}

Projection project_point(const Vec3& p_cam, const CameraIntrinsics& camera) {
  if (!(p_cam.z() >= camera.min_depth)) {
    throw Error(ErrorCode::kBehindCamera, "depth " + std::to_string(p_cam.z()) + " below minimum");
  }
  const Vec2 pixel = project_unchecked(p_cam, camera);
  return {pixel, camera.in_bounds(pixel)};
}

}  // namespace odoslam
