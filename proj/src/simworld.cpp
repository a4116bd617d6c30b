#include "odoslam/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "odoslam/errors.hpp"

namespace odoslam {
namespace {

constexpr double kPi = std::numbers::pi;

// Point at arc-length `s` along the room perimeter (counter-clockwise from the
// origin corner) and the inward wall normal there.
std::pair<Vec2, Vec2> perimeter_point(double s, double sx, double sy) {
  const double perimeter = 2.0 * (sx + sy);
  s = std::fmod(s, perimeter);
  if (s < 0.0) s += perimeter;
  if (s < sx) return {{s, 0.0}, {0.0, 1.0}};
  s -= sx;
  if (s < sy) return {{sx, s}, {-1.0, 0.0}};
  s -= sy;
  if (s < sx) return {{sx - s, sy}, {0.0, -1.0}};
  s -= sx;
  return {{0.0, sy - s}, {1.0, 0.0}};
}

// Normalized trapezoidal profile over [0, 1] with peak rate `v` and
// acceleration `a`, both in units of the normalized coordinate.
struct Profile {
  double v = 1.0;
  double a = 1.0;
  double duration = 0.0;
  double t_acc = 0.0;

  static Profile make(double v, double a) {
    Profile p{v, a};
    if (v * v / a >= 1.0) {
      p.t_acc = std::sqrt(1.0 / a);
      p.v = a * p.t_acc;
      p.duration = 2.0 * p.t_acc;
    } else {
      p.t_acc = v / a;
      p.duration = 1.0 / v + v / a;
    }
    return p;
  }

  double at(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= duration) return 1.0;
    if (t < t_acc) return 0.5 * a * t * t;
    const double t_dec = duration - t_acc;
    if (t <= t_dec) return 0.5 * a * t_acc * t_acc + v * (t - t_acc);
    const double r = duration - t;
    return 1.0 - 0.5 * a * r * r;
  }
};

struct Segment {
  Waypoint from;
  Waypoint to;
  Profile profile;
  double start = 0.0;
};

Pose3 planar_pose(double x, double y, double yaw) {
  return {Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(), Vec3(x, y, 0.0)};
}

}  // namespace

WorldConfig WorldConfig::lab(std::uint64_t seed) {
  WorldConfig c;
  c.preset = "lab";
  c.size_x = 10.0;
  c.size_y = 9.0;
  c.height = 3.0;
  c.wall_landmarks = 900;
  c.clutter_landmarks = 300;
  c.clusters = 0;
  c.wall_min_z = 0.1;
  c.wall_max_z = 2.9;
  c.clutter_min_z = 0.2;
  c.clutter_max_z = 1.4;
  c.clear_radius = 2.6;
  c.seed = seed;
  return c;
}

WorldConfig WorldConfig::hall(std::uint64_t seed) {
  WorldConfig c;
  c.preset = "hall";
  c.size_x = 16.0;
  c.size_y = 27.5;
  c.height = 6.0;
  c.wall_landmarks = 360;
  c.clutter_landmarks = 40;
  c.clusters = 18;
  c.cluster_radius = 0.9;
  c.wall_min_z = 0.2;
  c.wall_max_z = 4.0;
  c.clutter_min_z = 0.2;
  c.clutter_max_z = 2.5;
  c.clear_radius = 6.0;
  c.seed = seed;
  return c;
}

WorldConfig WorldConfig::preset_named(const std::string& name, std::uint64_t seed) {
  if (name == "lab") return lab(seed);
  if (name == "hall") return hall(seed);
  throw Error(ErrorCode::kConfig, "unknown world preset '" + name + "'");
}

World build_world(const WorldConfig& c) {
  if (!(c.size_x > 0.0) || !(c.size_y > 0.0) || !(c.height > 0.0)) {
    throw Error(ErrorCode::kConfig, "world dimensions must be positive");
  }
  if (c.wall_landmarks < 0 || c.clutter_landmarks < 0 || c.wall_landmarks + c.clutter_landmarks <= 0) {
    throw Error(ErrorCode::kConfig, "world needs a positive landmark count");
  }
  if (c.clusters < 0 || !(c.wall_min_z < c.wall_max_z) || !(c.clutter_min_z < c.clutter_max_z) ||
      c.wall_max_z > c.height || c.clutter_max_z > c.height || c.wall_min_z < 0.0 ||
      c.clutter_min_z < 0.0) {
    throw Error(ErrorCode::kConfig, "invalid landmark height band or cluster count");
  }

  World world;
  world.name = c.preset;
  world.extent.min = Vec3::Zero();
  world.extent.max = Vec3(c.size_x, c.size_y, c.height);

  Rng rng(derive_seed(c.seed, 0));
  const double perimeter = 2.0 * (c.size_x + c.size_y);
  int next_id = 0;

  // Cluster centers are spread evenly around the perimeter with jitter.
  std::vector<std::pair<double, double>> centers;  // (arc length, height)
  for (int i = 0; i < c.clusters; ++i) {
    const double s = (i + rng.uniform(-0.3, 0.3)) * perimeter / c.clusters;
    centers.emplace_back(s, rng.uniform(c.wall_min_z + c.cluster_radius, c.wall_max_z - c.cluster_radius));
  }

  for (int i = 0; i < c.wall_landmarks; ++i) {
    double s;
    double z;
    if (centers.empty()) {
      s = rng.uniform(0.0, perimeter);
      z = rng.uniform(c.wall_min_z, c.wall_max_z);
    } else {
      const auto& [cs, cz] = centers[i % centers.size()];
      s = cs + rng.uniform(-c.cluster_radius, c.cluster_radius);
      z = std::clamp(cz + rng.uniform(-c.cluster_radius, c.cluster_radius), c.wall_min_z, c.wall_max_z);
    }
    auto [p, normal] = perimeter_point(s, c.size_x, c.size_y);
    // Slight relief off the wall plane.
    const Vec2 q = p + normal * rng.uniform(0.0, 0.15);
    world.landmarks.push_back({next_id++, Vec3(q.x(), q.y(), z)});
  }

  const Vec2 center(0.5 * c.size_x, 0.5 * c.size_y);
  int placed = 0;
  int attempts = 0;
  while (placed < c.clutter_landmarks) {
    if (++attempts > 1000 * (c.clutter_landmarks + 1)) {
      throw Error(ErrorCode::kConfig, "clear_radius leaves no room for clutter");
    }
    const Vec2 q(rng.uniform(0.3, c.size_x - 0.3), rng.uniform(0.3, c.size_y - 0.3));
    const double z = rng.uniform(c.clutter_min_z, c.clutter_max_z);
    if ((q - center).norm() < c.clear_radius) continue;
    world.landmarks.push_back({next_id++, Vec3(q.x(), q.y(), z)});
    ++placed;
  }
  return world;
}

TrajectoryConfig TrajectoryConfig::orbit(const Vec2& center, double radius, double start_angle,
                                         double turns, int segments_per_turn) {
  TrajectoryConfig t;
  const int n = std::max(1, static_cast<int>(std::lround(turns * segments_per_turn)));
  const double step = turns * 2.0 * kPi / n;
  for (int i = 0; i <= n; ++i) {
    const double a = start_angle + i * step;
    t.waypoints.push_back({center.x() + radius * std::cos(a), center.y() + radius * std::sin(a), a});
  }
  return t;
}

TrajectoryConfig TrajectoryConfig::preset_for(const std::string& preset) {
  if (preset == "lab") return orbit({5.0, 4.5}, 1.5, 0.5 * kPi, 13.0 / 12.0);
  if (preset == "hall") return orbit({8.0, 13.75}, 3.5, 0.5 * kPi, 13.0 / 12.0);
  throw Error(ErrorCode::kConfig, "no default trajectory for preset '" + preset + "'");
}

TrajectoryConfig TrajectoryConfig::square_loop(const Vec2& center, double half_side) {
  TrajectoryConfig t;
  const double h = half_side;
  // Corners counter-clockwise from south-west, each facing diagonally out.
  const Vec2 corners[] = {{-h, -h}, {h, -h}, {h, h}, {-h, h}};
  for (int i = 0; i <= 4; ++i) {
    const Vec2 c = center + corners[i % 4];
    t.waypoints.push_back({c.x(), c.y(), -0.75 * kPi + 0.5 * kPi * i});
  }
  // Overlap: a third of the first side again.
  const Vec2 c = center + corners[0] + (corners[1] - corners[0]) / 3.0;
  t.waypoints.push_back({c.x(), c.y(), 1.25 * kPi + 0.5 * kPi / 3.0});
  return t;
}

void NoiseModel::validate() const {
  if (pixel_sigma < 0.0 || odom_trans_sigma < 0.0 || odom_rot_sigma < 0.0) {
    throw Error(ErrorCode::kConfig, "noise sigmas must be non-negative");
  }
}

Pose3 default_body_to_camera() {
  Mat3 r;
  r << 0.0, 0.0, 1.0,  //
      -1.0, 0.0, 0.0,  //
      0.0, -1.0, 0.0;
  return {r, Vec3(0.08, 0.0, 1.15)};
}

std::vector<Observation> render_observations(const World& world, const Pose3& T_WB,
                                             const CameraIntrinsics& camera, const Pose3& T_BC,
                                             double pixel_sigma, Rng& rng) {
  const Pose3 T_CW = (T_WB * T_BC).inverse();
  std::vector<Observation> out;
  for (const auto& lm : world.landmarks) {
    const Vec3 pc = T_CW * lm.position;
    if (pc.z() < camera.min_depth || pc.z() > camera.max_depth) continue;
    const Vec2 pixel = project_unchecked(pc, camera);
    if (!camera.in_bounds(pixel)) continue;
    Vec2 noisy = pixel;
    if (pixel_sigma > 0.0) {
      noisy.x() += rng.normal(pixel_sigma);
      noisy.y() += rng.normal(pixel_sigma);
    }
    if (!camera.in_bounds(noisy)) continue;
    out.push_back({lm.id, noisy});
  }
  return out;
}

SimRun simulate_run(const World& world, const TrajectoryConfig& trajectory,
                    const CameraIntrinsics& camera, const Pose3& T_BC, const NoiseModel& noise) {
  camera.validate();
  noise.validate();
  const auto& wps = trajectory.waypoints;
  if (wps.size() < 2) throw Error(ErrorCode::kConfig, "trajectory needs at least two waypoints");
  if (!(trajectory.rate_hz > 0.0) || !(trajectory.max_linear_speed > 0.0) ||
      !(trajectory.max_angular_speed > 0.0) || !(trajectory.linear_accel > 0.0) ||
      !(trajectory.angular_accel > 0.0)) {
    throw Error(ErrorCode::kConfig, "trajectory rates must be positive");
  }
  for (const auto& w : wps) {
    if (!world.extent.contains(Vec3(w.x, w.y, world.extent.min.z()))) {
      throw Error(ErrorCode::kConfig, "waypoint leaves the world extent");
    }
  }

  std::vector<Segment> segments;
  double clock = 0.0;
  for (std::size_t i = 1; i < wps.size(); ++i) {
    const double d = std::hypot(wps[i].x - wps[i - 1].x, wps[i].y - wps[i - 1].y);
    const double r = std::abs(wps[i].yaw - wps[i - 1].yaw);
    if (d == 0.0 && r == 0.0) continue;
    double v = std::numeric_limits<double>::infinity();
    double a = std::numeric_limits<double>::infinity();
    if (d > 0.0) {
      v = std::min(v, trajectory.max_linear_speed / d);
      a = std::min(a, trajectory.linear_accel / d);
    }
    if (r > 0.0) {
      v = std::min(v, trajectory.max_angular_speed / r);
      a = std::min(a, trajectory.angular_accel / r);
    }
    Segment seg{wps[i - 1], wps[i], Profile::make(v, a), clock};
    clock += seg.profile.duration;
    segments.push_back(seg);
  }
  if (segments.empty()) throw Error(ErrorCode::kConfig, "trajectory has no motion");

  SimRun run;
  run.world = world;
  run.camera = camera;
  run.T_BC = T_BC;
  run.noise = noise;

  const auto n_samples = static_cast<std::size_t>(std::floor(clock * trajectory.rate_hz)) + 1;
  std::size_t seg_index = 0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double t = static_cast<double>(k) / trajectory.rate_hz;
    while (seg_index + 1 < segments.size() &&
           t >= segments[seg_index].start + segments[seg_index].profile.duration) {
      ++seg_index;
    }
    const Segment& seg = segments[seg_index];
    const double s = seg.profile.at(t - seg.start);
    const double x = seg.from.x + s * (seg.to.x - seg.from.x);
    const double y = seg.from.y + s * (seg.to.y - seg.from.y);
    const double yaw = seg.from.yaw + s * (seg.to.yaw - seg.from.yaw);
    run.ground_truth.push_back({trajectory.start_time + t, planar_pose(x, y, yaw)});
  }

  Rng pixel_rng(derive_seed(noise.seed, 1));
  Rng odom_rng(derive_seed(noise.seed, 2));
  Pose2 odom;  // O coincides with the body at the first sample
  for (std::size_t k = 0; k < run.ground_truth.size(); ++k) {
    const auto& gt = run.ground_truth[k];
    if (k > 0) {
      const Pose3 delta = relative_pose(run.ground_truth[k - 1].body_pose, gt.body_pose);
      const double dx = delta.translation().x();
      const double dy = delta.translation().y();
      const double dyaw = std::atan2(delta.rotation()(1, 0), delta.rotation()(0, 0));
      const double dist = std::hypot(dx, dy);
      // Variance grows linearly with the distance (angle) covered, so the
      // per-axis error after 1 m (1 rad) has standard deviation sigma.
      const double nx = odom_rng.normal(noise.odom_trans_sigma * std::sqrt(dist));
      const double ny = odom_rng.normal(noise.odom_trans_sigma * std::sqrt(dist));
      const double nr = odom_rng.normal(noise.odom_rot_sigma * std::sqrt(std::abs(dyaw)));
      odom = odom * Pose2(dx + nx, dy + ny, dyaw + nr);
    }
    Frame frame;
    frame.timestamp = gt.timestamp;
    frame.odometry_pose = odom.to_pose3();
    frame.observations =
        render_observations(world, gt.body_pose, camera, T_BC, noise.pixel_sigma, pixel_rng);
    run.frames.push_back(std::move(frame));
  }
  return run;
}

SimRun apply_events(const SimRun& run, std::span<const ScriptedEvent> events) {
  if (events.empty()) return run;
  if (run.frames.empty()) throw Error(ErrorCode::kConfig, "events on an empty run");
  const double t_first = run.frames.front().timestamp;
  const double t_last = run.frames.back().timestamp;
  constexpr double kTol = 1e-9;

  std::vector<KidnapEvent> kidnaps;
  std::vector<OcclusionEvent> occlusions;
  for (const auto& e : events) {
    if (const auto* o = std::get_if<OcclusionEvent>(&e)) {
      if (!(o->t0 <= o->t1) || o->t0 < t_first - kTol || o->t1 > t_last + kTol) {
        throw Error(ErrorCode::kConfig, "occlusion window outside the run");
      }
      occlusions.push_back(*o);
    } else {
      const auto& k = std::get<KidnapEvent>(e);
      if (k.t < t_first - kTol || k.t > t_last + kTol) {
        throw Error(ErrorCode::kConfig, "kidnap time outside the run");
      }
      kidnaps.push_back(k);
    }
  }

  auto frame_index_at = [&](double t) {
    const auto it = std::lower_bound(run.frames.begin(), run.frames.end(), t - kTol,
                                     [](const Frame& f, double v) { return f.timestamp < v; });
    return static_cast<std::size_t>(it - run.frames.begin());
  };

  std::sort(kidnaps.begin(), kidnaps.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  for (std::size_t i = 1; i < kidnaps.size(); ++i) {
    if (frame_index_at(kidnaps[i].t) == frame_index_at(kidnaps[i - 1].t)) {
      throw Error(ErrorCode::kConfig, "two kidnaps land on the same frame");
    }
  }

  SimRun out = run;
  for (std::size_t e = 0; e < kidnaps.size(); ++e) {
    const std::size_t k = frame_index_at(kidnaps[e].t);
    const Pose3 jump = kidnaps[e].pose.to_pose3() * out.ground_truth[k].body_pose.inverse();
    Rng rng(derive_seed(run.noise.seed, 100 + e));
    for (std::size_t j = k; j < out.frames.size(); ++j) {
      Pose3 moved = jump * out.ground_truth[j].body_pose;
      if (j == k) moved = kidnaps[e].pose.to_pose3();
      if (!out.world.extent.contains(Vec3(moved.translation().x(), moved.translation().y(),
                                          out.world.extent.min.z()))) {
        throw Error(ErrorCode::kConfig, "kidnapped trajectory leaves the world extent");
      }
      out.ground_truth[j].body_pose = moved;
      out.frames[j].observations = render_observations(out.world, moved, out.camera, out.T_BC,
                                                       out.noise.pixel_sigma, rng);
    }
    out.frames[k].gt_discontinuity = true;
  }

  for (const auto& o : occlusions) {
    for (auto& f : out.frames) {
      if (f.timestamp >= o.t0 - kTol && f.timestamp <= o.t1 + kTol) f.observations.clear();
    }
  }
  return out;
}

}  // namespace odoslam
