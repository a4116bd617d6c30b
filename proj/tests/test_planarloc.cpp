#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "odoslam/planarloc.hpp"
#include "odoslam/random.hpp"
#include "test_util.hpp"

using namespace odoslam;
using odoslam::test::code_of;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Matrix3d mat(const Pose2& p) {
  Eigen::Matrix3d m;
  m << std::cos(p.yaw), -std::sin(p.yaw), p.x, std::sin(p.yaw), std::cos(p.yaw), p.y, 0, 0, 1;
  return m;
}

}  // namespace

TEST(PlanarLoc, CameraToBody) {
  EXPECT_TRUE(camera_to_body(Pose3(), Pose3()) == Pose3());
  // Camera 1.2 m above the body origin, identity rotations.
  const Pose3 T_BC(Mat3::Identity(), Vec3(0, 0, 1.2));
  const Pose3 T_WC(Mat3::Identity(), Vec3(3.0, 1.0, 1.5));
  const Pose3 body = camera_to_body(T_WC.inverse(), T_BC);
  EXPECT_LT((body.translation() - Vec3(3.0, 1.0, 0.3)).norm(), 1e-12);

  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const Pose3 T_CW = exp_se3({Vec3(rng.normal(), rng.normal(), rng.normal()),
                                Vec3(rng.normal(0.5), rng.normal(0.5), rng.normal(0.5))});
    const Pose3 bc = exp_se3({Vec3(rng.normal(), rng.normal(), rng.normal()),
                              Vec3(rng.normal(0.5), rng.normal(0.5), rng.normal(0.5))});
    const Mat4 oracle = T_CW.matrix().inverse() * bc.matrix().inverse();
    EXPECT_LT((camera_to_body(T_CW, bc).matrix() - oracle).norm(), 1e-10);
  }
}

TEST(PlanarLoc, MapFrameHasVerticalZ) {
  // The first camera sits at the world origin; its body frame is the map.
  const Pose3 T_BC = default_body_to_camera();
  const Pose3 T_MB0 = map_from_world(T_BC) * camera_to_body(Pose3(), T_BC);
  EXPECT_LT((T_MB0.matrix() - Mat4::Identity()).norm(), 1e-12);
}

TEST(PlanarLoc, Planarize) {
  const Pose2 p = planarize(Pose2(1.0, 2.0, kPi / 4).to_pose3());
  EXPECT_NEAR(p.x, 1.0, 1e-15);
  EXPECT_NEAR(p.y, 2.0, 1e-15);
  EXPECT_NEAR(p.yaw, kPi / 4, 1e-15);

  // Pitch perturbation: the projected x axis keeps its heading.
  const Pose3 pitched(exp_so3(Vec3(0, 0, kPi / 4)) * exp_so3(Vec3(0, 0.05, 0)), Vec3(1.0, 2.0, 0.3));
  const Pose2 q = planarize(pitched);
  EXPECT_DOUBLE_EQ(q.x, 1.0);
  EXPECT_DOUBLE_EQ(q.y, 2.0);
  EXPECT_NEAR(q.yaw, kPi / 4, 1e-12);
  // Roll and pitch together: analytic heading of the rotated x axis.
  const Mat3 R = exp_so3(Vec3(0, 0, 0.7)) * exp_so3(Vec3(0.04, 0, 0)) * exp_so3(Vec3(0, -0.05, 0));
  const Vec3 x_axis = R.col(0);
  EXPECT_NEAR(planarize(Pose3(R, Vec3::Zero())).yaw, std::atan2(x_axis.y(), x_axis.x()), 1e-15);
  EXPECT_LT(std::abs(planarize(Pose3(R, Vec3::Zero())).yaw - 0.7), 0.05);

  const Pose3 up(exp_so3(Vec3(0, -kPi / 2, 0)), Vec3::Zero());
  EXPECT_EQ(code_of([&] { planarize(up); }), ErrorCode::kDegenerateOrientation);
}

TEST(PlanarLoc, MapToOdomCorrection) {
  const Pose2 a(1.0, 2.0, 0.3);
  const Pose2 id = compute_map_to_odom(a, a);
  EXPECT_NEAR(id.x, 0.0, 1e-15);
  EXPECT_NEAR(id.y, 0.0, 1e-15);
  EXPECT_NEAR(id.yaw, 0.0, 1e-15);

  // Odometry drifted +0.5 m in x.
  const Pose2 c = compute_map_to_odom(Pose2(2.0, 1.0, 0.0), Pose2(2.5, 1.0, 0.0));
  EXPECT_NEAR(c.x, -0.5, 1e-15);
  EXPECT_NEAR(c.y, 0.0, 1e-15);

  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const Pose2 body(rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-3, 3));
    const Pose2 odom(rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-3, 3));
    const Pose2 corr = compute_map_to_odom(body, odom);
    EXPECT_LT((mat(corr) - mat(body) * mat(odom).inverse()).norm(), 1e-12);
    EXPECT_LT((mat(corr * odom) - mat(body)).norm(), 1e-9);
  }
}

TEST(PlanarLoc, PublisherHoldsCorrectionDuringOdometryOnly) {
  LocalizationPublisher pub;
  const Pose3 odo0 = Pose2(0.5, 0.0, 0.1).to_pose3();
  const Pose3 body0 = Pose2(1.0, 1.0, 0.2).to_pose3();
  const LocalizationOutput v = pub.update(0.0, body0, odo0, LocalizationSource::kVisual);
  ASSERT_TRUE(pub.correction().has_value());
  EXPECT_LT((mat(v.map_to_odom * planarize(odo0)) - mat(v.body_in_map)).norm(), 1e-9);

  const Pose3 odo1 = Pose2(0.9, 0.2, 0.3).to_pose3();
  const LocalizationOutput o = pub.update(0.1, Pose3(), odo1, LocalizationSource::kOdometryOnly);
  EXPECT_EQ(o.source, LocalizationSource::kOdometryOnly);
  EXPECT_DOUBLE_EQ(o.map_to_odom.x, v.map_to_odom.x);
  EXPECT_DOUBLE_EQ(o.map_to_odom.yaw, v.map_to_odom.yaw);
  EXPECT_LT((mat(o.body_in_map) - mat(v.map_to_odom) * mat(planarize(odo1))).norm(), 1e-12);
}
