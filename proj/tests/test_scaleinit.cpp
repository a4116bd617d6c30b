#include <gtest/gtest.h>

#include <cmath>

#include "odoslam/backend.hpp"
#include "odoslam/scaleinit.hpp"
#include "test_util.hpp"

using namespace odoslam;
using odoslam::test::code_of;

namespace {

// Keyframes whose camera centers follow `visual` and whose odometry (with
// identity extrinsics) follows `metric`.
std::vector<Keyframe> chain(const std::vector<Vec3>& visual, const std::vector<Vec2>& metric) {
  std::vector<Keyframe> out;
  for (std::size_t i = 0; i < visual.size(); ++i) {
    Keyframe kf;
    kf.id = static_cast<int>(i);
    kf.T_CW = Pose3(Mat3::Identity(), -visual[i]);
    kf.odom_T_OB = Pose2(metric[i].x(), metric[i].y(), 0.0).to_pose3();
    out.push_back(kf);
  }
  return out;
}

double total_visual_cost(const MapState& map) {
  double c = 0.0;
  for (const auto& [id, l] : map.landmarks) {
    for (int o : l.observers) {
      const auto& kf = map.keyframe(o);
      c += reprojection_residual(kf.T_CW, l.position, kf.find(id)->pixel, map.camera).squaredNorm();
    }
  }
  return c;
}

}  // namespace

TEST(ScaleInit, DirectArithmetic) {
  const Pose3 I;
  // Visual norms {1,1}, odometry norms {2,2}.
  EXPECT_NEAR(estimate_scale(chain({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}}, {{0, 0}, {2, 0}, {2, 2}}), I).scale,
              2.0, 1e-15);
  // Identical increments.
  EXPECT_NEAR(estimate_scale(chain({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}}, {{0, 0}, {1, 0}, {1, 1}}), I).scale,
              1.0, 1e-15);
  // Odometry norms {3,4}, visual norms {1,1}: sqrt(25)/sqrt(2).
  const ScaleEstimate e =
      estimate_scale(chain({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}}, {{0, 0}, {3, 0}, {3, 4}}), I);
  EXPECT_NEAR(e.scale, 3.5355339059327378, 1e-12);
  EXPECT_EQ(e.keyframes_used, 3);
}

TEST(ScaleInit, InvariantToVisualFrameRotation) {
  // The visual map lives in its own frame: rotating it changes nothing.
  const Mat3 R = exp_so3(Vec3(0.3, -1.1, 0.4));
  std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}};
  for (auto& p : v) p = R * p;
  EXPECT_NEAR(estimate_scale(chain(v, {{0, 0}, {3, 0}, {3, 4}}), Pose3()).scale, 3.5355339059327378, 1e-12);
}

TEST(ScaleInit, Errors) {
  const Pose3 I;
  EXPECT_EQ(code_of([&] { estimate_scale(chain({{0, 0, 0}}, {{0, 0}}), I); }), ErrorCode::kInvalidState);
  EXPECT_EQ(code_of([&] { estimate_scale(chain({{0, 0, 0}, {0, 0, 0}}, {{0, 0}, {1, 0}}), I); }),
            ErrorCode::kDegenerateMotion);
  EXPECT_EQ(code_of([&] { estimate_scale(chain({{0, 0, 0}, {1, 0, 0}}, {{0, 0}, {0, 0}}), I); }),
            ErrorCode::kDegenerateMotion);
}

TEST(ScaleInit, GroundTruthRatioOnZeroNoiseRun) {
  // Visual map at a known scale: the estimate recovers its inverse.
  const SimRun run = test::lab_clean();
  const MapState metric = test::truth_map(run, test::every(0, 12, 10));
  MapState shrunk = metric;
  for (auto& [id, kf] : shrunk.keyframes) kf.T_CW = Pose3(kf.T_CW.rotation(), kf.T_CW.translation() / 3.7);
  EXPECT_NEAR(estimate_scale(shrunk).scale, 3.7, 3.7e-12);
}

TEST(ScaleInit, ApplyScale) {
  const SimRun run = test::lab_clean();
  MapState map = test::truth_map(run, test::every(0, 12, 8), /*metric=*/false);
  for (auto& [id, kf] : map.keyframes) kf.T_CW = Pose3(kf.T_CW.rotation(), kf.T_CW.translation() * 0.4);
  for (auto& [id, l] : map.landmarks) l.position *= 0.4;

  const MapState same = apply_scale(map, 1.0);
  EXPECT_FALSE(same.unscaled);
  MapState flagged = map;
  flagged.unscaled = false;
  EXPECT_TRUE(same == flagged);

  const MapState doubled = apply_scale(map, 2.0);
  const Vec3 c0 = camera_center(map.keyframe(0).T_CW), c5 = camera_center(map.keyframe(5).T_CW);
  const Vec3 d0 = camera_center(doubled.keyframe(0).T_CW), d5 = camera_center(doubled.keyframe(5).T_CW);
  EXPECT_NEAR((d5 - d0).norm(), 2.0 * (c5 - c0).norm(), 1e-12);
  EXPECT_TRUE(doubled.keyframe(3).T_CW.rotation() == map.keyframe(3).T_CW.rotation());
  // Projective scale invariance.
  EXPECT_NEAR(total_visual_cost(doubled), total_visual_cost(map), 1e-9);

  const ScaleEstimate s = estimate_scale(map);
  EXPECT_NEAR(s.scale, 2.5, 1e-9);
  const MapState metric = apply_scale(map, s.scale);
  EXPECT_NEAR(estimate_scale(metric).scale, 1.0, 1e-9);

  EXPECT_EQ(code_of([&] { apply_scale(metric, 2.0); }), ErrorCode::kInvalidState);
  EXPECT_EQ(code_of([&] { apply_scale(map, 0.0); }), ErrorCode::kConfig);
}
