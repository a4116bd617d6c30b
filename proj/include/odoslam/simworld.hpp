#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "odoslam/geometry.hpp"
#include "odoslam/random.hpp"

namespace odoslam {

struct WorldLandmark {
  int id = 0;
  Vec3 position = Vec3::Zero();
};

struct Bounds {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Vec3 size() const { return max - min; }
};

struct World {
  std::string name;
  std::vector<WorldLandmark> landmarks;  // sorted by id
  Bounds extent;
};

/// Room-shaped world: landmarks scattered on the four walls (optionally
/// grouped in clusters, e.g. doors and pillars) plus clutter inside the room,
/// away from a clear central area where the robot drives.
struct WorldConfig {
  std::string preset = "custom";
  double size_x = 10.0;
  double size_y = 9.0;
  double height = 3.0;
  int wall_landmarks = 900;
  int clutter_landmarks = 300;
  int clusters = 0;  // 0: uniform on walls
  double cluster_radius = 0.8;
  double wall_min_z = 0.1;
  double wall_max_z = 2.9;
  double clutter_min_z = 0.2;
  double clutter_max_z = 1.4;
  double clear_radius = 2.8;
  std::uint64_t seed = 7;

  static WorldConfig lab(std::uint64_t seed = 7);
  static WorldConfig hall(std::uint64_t seed = 7);
  /// "lab" or "hall"; throws kConfig otherwise.
  static WorldConfig preset_named(const std::string& name, std::uint64_t seed);
};

World build_world(const WorldConfig& config);

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;  // unwrapped; consecutive yaws are interpolated linearly
};

struct TrajectoryConfig {
  std::vector<Waypoint> waypoints;
  double max_linear_speed = 0.3;    // m/s
  double max_angular_speed = 0.3;   // rad/s
  double linear_accel = 0.3;        // m/s^2
  double angular_accel = 0.5;       // rad/s^2
  double rate_hz = 10.0;
  double start_time = 0.0;

  /// Robot circling the room center while facing outward, so every segment is
  /// a sideways arc. `turns` full revolutions starting at `start_angle`.
  static TrajectoryConfig orbit(const Vec2& center, double radius, double start_angle, double turns,
                                int segments_per_turn = 12);
  /// Default trajectory for a preset world ("lab" or "hall").
  static TrajectoryConfig preset_for(const std::string& preset);
  /// Closed square around `center`, heading rotating a quarter turn per side,
  /// followed by a short overlap past the start.
  static TrajectoryConfig square_loop(const Vec2& center, double half_side);
};

struct NoiseModel {
  double pixel_sigma = 1.0;       // pixels
  double odom_trans_sigma = 0.02;  // per-axis std after 1 m traveled, m/sqrt(m)
  double odom_rot_sigma = 0.01;    // std after 1 rad turned, rad/sqrt(rad)
  std::uint64_t seed = 1;

  void validate() const;
  static NoiseModel zero() { return {0.0, 0.0, 0.0, 1}; }
};

struct GroundTruthSample {
  double timestamp = 0.0;
  Pose3 body_pose;  // T_WB, world frame
};

struct Observation {
  int landmark_id = 0;
  Vec2 pixel = Vec2::Zero();
};

struct Frame {
  double timestamp = 0.0;
  std::vector<Observation> observations;  // sorted by landmark id
  Pose3 odometry_pose;                    // T_OB at capture
  // Ground truth jumped at this frame (scripted kidnap). Evaluation metadata;
  // the estimator never reads it.
  bool gt_discontinuity = false;
};

/// Body-to-camera extrinsic of the forehead camera: camera z along the body
/// x axis, 1.15 m above the base, slightly ahead of the rotation axis.
Pose3 default_body_to_camera();

struct SimRun {
  World world;
  CameraIntrinsics camera;
  Pose3 T_BC;
  NoiseModel noise;
  std::vector<GroundTruthSample> ground_truth;
  std::vector<Frame> frames;
};

SimRun simulate_run(const World& world, const TrajectoryConfig& trajectory,
                    const CameraIntrinsics& camera, const Pose3& T_BC, const NoiseModel& noise);

/// Observations of every landmark visible from `T_WB`, noise drawn from `rng`
/// when `pixel_sigma` > 0.
std::vector<Observation> render_observations(const World& world, const Pose3& T_WB,
                                             const CameraIntrinsics& camera, const Pose3& T_BC,
                                             double pixel_sigma, Rng& rng);

struct OcclusionEvent {
  double t0 = 0.0;
  double t1 = 0.0;
};

struct KidnapEvent {
  double t = 0.0;
  Pose2 pose;  // ground-truth body pose right after the teleport
};

using ScriptedEvent = std::variant<OcclusionEvent, KidnapEvent>;

/// Occlusions empty the observation lists inside their window; a kidnap
/// teleports ground truth (the rest of the trajectory moves rigidly with it)
/// and re-renders observations, while odometry keeps integrating untouched.
SimRun apply_events(const SimRun& run, std::span<const ScriptedEvent> events);

}  // namespace odoslam
