#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "odoslam/simworld.hpp"
#include "test_util.hpp"

using namespace odoslam;
using odoslam::test::code_of;

TEST(SimWorld, PresetsHaveTheirExtents) {
  const World lab = build_world(WorldConfig::lab());
  const World hall = build_world(WorldConfig::hall());
  EXPECT_DOUBLE_EQ(hall.extent.size().x(), 16.0);
  EXPECT_DOUBLE_EQ(hall.extent.size().y(), 27.5);
  for (const auto& l : hall.landmarks) EXPECT_TRUE(hall.extent.contains(l.position));
  // The hall is larger yet sparser.
  const double lab_density = lab.landmarks.size() / (lab.extent.size().x() * lab.extent.size().y());
  const double hall_density =
      hall.landmarks.size() / (hall.extent.size().x() * hall.extent.size().y());
  EXPECT_GT(lab_density, 3.0 * hall_density);
  EXPECT_EQ(code_of([] { WorldConfig::preset_named("garage", 1); }), ErrorCode::kConfig);
}

TEST(SimWorld, DeterministicPerSeed) {
  const SimRun a = test::preset_run("lab", 4, NoiseModel{});
  const SimRun b = test::preset_run("lab", 4, NoiseModel{});
  const SimRun c = test::preset_run("lab", 5, NoiseModel{});
  ASSERT_EQ(a.frames.size(), b.frames.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    ASSERT_EQ(a.frames[i].observations.size(), b.frames[i].observations.size());
    for (std::size_t j = 0; j < a.frames[i].observations.size(); ++j) {
      EXPECT_EQ(a.frames[i].observations[j].pixel, b.frames[i].observations[j].pixel);
    }
    EXPECT_TRUE(a.frames[i].odometry_pose == b.frames[i].odometry_pose);
    differs |= !(a.frames[i].odometry_pose == c.frames[i].odometry_pose);
  }
  EXPECT_TRUE(differs);
}

TEST(SimWorld, ZeroNoiseObservationsAreExactProjections) {
  const SimRun run = test::lab_clean();
  std::map<int, Vec3> world;
  for (const auto& l : run.world.landmarks) world[l.id] = l.position;
  for (std::size_t i = 0; i < run.frames.size(); i += 25) {
    const Pose3 T_CW = test::true_T_CW(run, i);
    ASSERT_FALSE(run.frames[i].observations.empty());
    int prev = -1;
    for (const auto& o : run.frames[i].observations) {
      EXPECT_GT(o.landmark_id, prev);  // sorted, unique
      prev = o.landmark_id;
      const Vec3 pc = T_CW * world.at(o.landmark_id);
      const Projection p = project_point(pc, run.camera);
      EXPECT_TRUE(p.in_bounds);
      EXPECT_LT((p.pixel - o.pixel).norm(), 1e-9);
    }
  }
}

TEST(SimWorld, ZeroNoiseOdometryFollowsGroundTruth) {
  const SimRun run = test::lab_clean();
  for (std::size_t i = 1; i < run.frames.size(); ++i) {
    const Pose3 odo = relative_pose(run.frames[i - 1].odometry_pose, run.frames[i].odometry_pose);
    const Pose3 gt = relative_pose(run.ground_truth[i - 1].body_pose, run.ground_truth[i].body_pose);
    EXPECT_LT((odo.matrix() - gt.matrix()).norm(), 1e-9);
  }
}

TEST(SimWorld, PixelNoiseHasTheRequestedSigma) {
  // The pixel stream is independent of the odometry stream, so noisy and clean
  // runs with the same seed observe the same ids except near the image border.
  NoiseModel noisy{0.8, 0.0, 0.0, 1};
  const SimRun clean = test::preset_run("lab", 1, NoiseModel::zero());
  const SimRun run = test::preset_run("lab", 1, noisy);
  double abs_sum = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < run.frames.size(); ++i) {
    std::map<int, Vec2> ref;
    for (const auto& o : clean.frames[i].observations) ref[o.landmark_id] = o.pixel;
    for (const auto& o : run.frames[i].observations) {
      const auto it = ref.find(o.landmark_id);
      if (it == ref.end()) continue;
      abs_sum += std::abs(o.pixel.x() - it->second.x()) + std::abs(o.pixel.y() - it->second.y());
      n += 2;
    }
  }
  ASSERT_GT(n, 10000);
  // E|X| = sigma * sqrt(2 / pi) for a zero-mean Gaussian.
  const double sigma_hat = std::sqrt(std::numbers::pi / 2.0) * abs_sum / n;
  EXPECT_GT(sigma_hat, 0.9 * 0.8);
  EXPECT_LT(sigma_hat, 1.1 * 0.8);
}

TEST(SimWorld, OdometryNoiseScalesWithSquareRootOfDistance) {
  NoiseModel noise{0.0, 0.02, 0.01, 1};
  double sum = 0.0;
  long n = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SimRun run = test::preset_run("lab", seed, noise);
    for (std::size_t i = 1; i < run.frames.size(); ++i) {
      const Pose3 odo = relative_pose(run.frames[i - 1].odometry_pose, run.frames[i].odometry_pose);
      const Pose3 gt =
          relative_pose(run.ground_truth[i - 1].body_pose, run.ground_truth[i].body_pose);
      const double dist = gt.translation().head<2>().norm();
      if (dist < 1e-3) continue;
      const Vec2 err = (odo.translation() - gt.translation()).head<2>() / std::sqrt(dist);
      sum += err.squaredNorm();
      n += 2;
    }
  }
  const double sigma_hat = std::sqrt(sum / n);
  EXPECT_NEAR(sigma_hat, 0.02, 0.002);
}

TEST(SimWorld, NoiseModelValidation) {
  EXPECT_EQ(code_of([] { NoiseModel{-1.0, 0.0, 0.0, 1}.validate(); }), ErrorCode::kConfig);
  EXPECT_NO_THROW(NoiseModel::zero().validate());
}

TEST(SimWorld, OcclusionEmptiesObservationsOnly) {
  const SimRun run = test::lab_clean();
  const std::vector<ScriptedEvent> ev{OcclusionEvent{5.0, 7.0}};
  const SimRun occ = apply_events(run, ev);
  for (std::size_t i = 0; i < run.frames.size(); ++i) {
    const double t = run.frames[i].timestamp;
    const bool inside = t >= 5.0 - 1e-9 && t <= 7.0 + 1e-9;
    EXPECT_EQ(occ.frames[i].observations.empty(), inside) << t;
    EXPECT_TRUE(occ.frames[i].odometry_pose == run.frames[i].odometry_pose);
  }
  const std::vector<ScriptedEvent> bad{OcclusionEvent{5.0, 1e6}};
  EXPECT_EQ(code_of([&] { apply_events(run, bad); }), ErrorCode::kConfig);
}

TEST(SimWorld, KidnapTeleportsGroundTruthButNotOdometry) {
  const SimRun run = test::lab_clean();
  const Pose2 target(5.0, 3.0, 0.4);
  const std::vector<ScriptedEvent> ev{KidnapEvent{10.0, target}};
  const SimRun k = apply_events(run, ev);
  std::size_t at = 0;
  while (run.frames[at].timestamp < 10.0 - 1e-9) ++at;
  EXPECT_TRUE(k.frames[at].gt_discontinuity);
  EXPECT_LT((k.ground_truth[at].body_pose.matrix() - target.to_pose3().matrix()).norm(), 1e-12);
  for (std::size_t i = 0; i < run.frames.size(); ++i) {
    EXPECT_TRUE(k.frames[i].odometry_pose == run.frames[i].odometry_pose);
    if (i < at) EXPECT_TRUE(k.ground_truth[i].body_pose == run.ground_truth[i].body_pose);
  }
  // The rest of the trajectory moves rigidly.
  for (std::size_t i = at + 1; i < run.frames.size(); i += 20) {
    const Pose3 a = relative_pose(run.ground_truth[at].body_pose, run.ground_truth[i].body_pose);
    const Pose3 b = relative_pose(k.ground_truth[at].body_pose, k.ground_truth[i].body_pose);
    EXPECT_LT((a.matrix() - b.matrix()).norm(), 1e-9);
  }
}

TEST(SimWorld, TrajectoryRespectsSpeedLimits) {
  const SimRun run = test::lab_clean();
  const TrajectoryConfig cfg = TrajectoryConfig::preset_for("lab");
  for (std::size_t i = 1; i < run.ground_truth.size(); ++i) {
    const Pose3 d = relative_pose(run.ground_truth[i - 1].body_pose, run.ground_truth[i].body_pose);
    EXPECT_LE(d.translation().norm() * cfg.rate_hz, cfg.max_linear_speed + 1e-9);
    EXPECT_LE(rotation_angle(d.rotation()) * cfg.rate_hz, cfg.max_angular_speed + 1e-9);
  }
}
