#include "odoslam/config.hpp"

#include <set>

#include "odoslam/errors.hpp"
#include "odoslam/io.hpp"

namespace odoslam {

using nlohmann::json;

json config_to_json(const RunConfig& c) {
  const auto& s = c.simulation;
  json occl = json::array();
  for (const auto& o : s.occlusions) occl.push_back({o.t0, o.t1});
  json kid = json::array();
  for (const auto& k : s.kidnaps) kid.push_back({k.t, k.pose.x, k.pose.y, k.pose.yaw});
  const auto& o = c.slam;
  return {
      {"config_version", kConfigVersion},
      {"simulation",
       {{"preset", s.preset},
        {"world_seed", s.world_seed},
        {"trajectory", s.trajectory},
        {"pixel_sigma", s.noise.pixel_sigma},
        {"odom_trans_sigma", s.noise.odom_trans_sigma},
        {"odom_rot_sigma", s.noise.odom_rot_sigma},
        {"seed", s.noise.seed},
        {"occlusions", occl},
        {"kidnaps", kid}}},
      {"slam",
       {{"mode", to_string(o.mode)},
        {"pipelined", o.pipelined},
        {"max_pending_keyframes", o.max_pending_keyframes},
        {"max_frames_ahead", o.max_frames_ahead},
        {"odometry_factors", o.odometry_factors},
        {"loop_closure", o.loop_closure},
        {"scale_keyframes", o.scale_keyframes},
        {"covisibility_threshold", o.covisibility_threshold},
        {"local_map_recent", o.local_map_recent},
        {"pixel_sigma", o.pixel_sigma()},
        {"odom_trans_sigma", o.odom_trans_sigma},
        {"odom_rot_sigma", o.odom_rot_sigma},
        {"chi2_gate", o.tracker.chi2_gate},
        {"min_inliers", o.tracker.min_inliers},
        {"keyframe_translation", o.keyframes.min_translation},
        {"keyframe_rotation", o.keyframes.min_rotation},
        {"keyframe_tracked_ratio", o.keyframes.min_tracked_ratio},
        {"min_parallax_deg", o.triangulation.min_parallax_deg},
        {"ba_max_iterations", o.ba.max_iterations},
        {"ba_min_relative_decrease", o.ba.min_relative_decrease},
        {"relocalization_overlap", o.relocalization.min_overlap},
        {"loop_overlap", o.loop.min_overlap},
        {"loop_min_keyframe_gap", o.loop.min_keyframe_gap}}},
      {"evaluation", {{"max_dt", c.evaluation.max_dt}, {"align", c.evaluation.align}}}};
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

// Reads the keys of one section, rejecting anything it does not know.
class Section {
 public:
  Section(const json& parent, const std::string& name) : name_(name) {
    if (!parent.contains(name)) return;
    node_ = &parent.at(name);
    if (!node_->is_object()) bad("'" + name + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (node_ == nullptr || std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : node_->items()) {
      if (!seen_.count(key)) bad("unknown key '" + name_ + "." + key + "'");
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (node_ == nullptr || !node_->contains(key)) return;
    const json& v = node_->at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) bad(name_ + "." + key + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) bad(name_ + "." + key + " must be an integer");
      if (std::is_unsigned_v<T> && v.get<long long>() < 0 && !v.is_number_unsigned()) {
        bad(name_ + "." + key + " must be non-negative");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) bad(name_ + "." + key + " must be a number");
    } else {
      if (!v.is_string()) bad(name_ + "." + key + " must be a string");
    }
    out = v.get<T>();
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    if (node_ == nullptr || !node_->contains(key)) return nullptr;
    return &node_->at(key);
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> seen_;
};

std::vector<double> number_row(const json& row, std::size_t n, const std::string& what) {
  if (!row.is_array() || row.size() != n) bad(what + " entries need " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (const auto& v : row) {
    if (!v.is_number()) bad(what + " entries must be numeric");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) bad("config must be a JSON object");
  if (!j.contains("config_version")) bad("missing config_version");
  if (!j.at("config_version").is_number_integer() || j.at("config_version").get<int>() != kConfigVersion) {
    bad("unsupported config_version " + j.at("config_version").dump());
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "config_version" && key != "simulation" && key != "slam" && key != "evaluation") {
      bad("unknown key '" + key + "'");
    }
  }
  RunConfig c;
  {
    Section s(j, "simulation");
    auto& sim = c.simulation;
    s.read("preset", sim.preset);
    s.read("world_seed", sim.world_seed);
    s.read("trajectory", sim.trajectory);
    s.read("pixel_sigma", sim.noise.pixel_sigma);
    s.read("odom_trans_sigma", sim.noise.odom_trans_sigma);
    s.read("odom_rot_sigma", sim.noise.odom_rot_sigma);
    s.read("seed", sim.noise.seed);
    if (const json* occl = s.raw("occlusions")) {
      if (!occl->is_array()) bad("simulation.occlusions must be an array");
      for (const auto& row : *occl) {
        const auto v = number_row(row, 2, "occlusion");
        sim.occlusions.push_back({v[0], v[1]});
      }
    }
    if (const json* kid = s.raw("kidnaps")) {
      if (!kid->is_array()) bad("simulation.kidnaps must be an array");
      for (const auto& row : *kid) {
        const auto v = number_row(row, 4, "kidnap");
        sim.kidnaps.push_back({v[0], Pose2(v[1], v[2], v[3])});
      }
    }
  }
  {
    Section s(j, "slam");
    auto& o = c.slam;
    std::string mode = to_string(o.mode);
    s.read("mode", mode);
    o.mode = mode_from_string(mode);
    s.read("pipelined", o.pipelined);
    s.read("max_pending_keyframes", o.max_pending_keyframes);
    s.read("max_frames_ahead", o.max_frames_ahead);
    s.read("odometry_factors", o.odometry_factors);
    s.read("loop_closure", o.loop_closure);
    s.read("scale_keyframes", o.scale_keyframes);
    s.read("covisibility_threshold", o.covisibility_threshold);
    s.read("local_map_recent", o.local_map_recent);
    double sigma = o.pixel_sigma();
    s.read("pixel_sigma", sigma);
    if (!(sigma > 0.0)) bad("slam.pixel_sigma must be positive");
    o.set_pixel_sigma(sigma);
    s.read("odom_trans_sigma", o.odom_trans_sigma);
    s.read("odom_rot_sigma", o.odom_rot_sigma);
    double gate = o.tracker.chi2_gate;
    s.read("chi2_gate", gate);
    o.tracker.chi2_gate = gate;
    o.initializer.chi2_gate = gate;
    o.triangulation.chi2_gate = gate;
    o.relocalization.tracker.chi2_gate = gate;
    o.loop.chi2_gate = gate;
    s.read("min_inliers", o.tracker.min_inliers);
    o.relocalization.tracker.min_inliers = o.tracker.min_inliers;
    s.read("keyframe_translation", o.keyframes.min_translation);
    s.read("keyframe_rotation", o.keyframes.min_rotation);
    s.read("keyframe_tracked_ratio", o.keyframes.min_tracked_ratio);
    s.read("min_parallax_deg", o.triangulation.min_parallax_deg);
    s.read("ba_max_iterations", o.ba.max_iterations);
    s.read("ba_min_relative_decrease", o.ba.min_relative_decrease);
    s.read("relocalization_overlap", o.relocalization.min_overlap);
    s.read("loop_overlap", o.loop.min_overlap);
    s.read("loop_min_keyframe_gap", o.loop.min_keyframe_gap);
  }
  {
    Section s(j, "evaluation");
    s.read("max_dt", c.evaluation.max_dt);
    s.read("align", c.evaluation.align);
  }
  if (c.simulation.preset != "lab" && c.simulation.preset != "hall") {
    bad("simulation.preset must be 'lab' or 'hall'");
  }
  if (c.simulation.trajectory != "orbit" && c.simulation.trajectory != "square") {
    bad("simulation.trajectory must be 'orbit' or 'square'");
  }
  c.simulation.noise.validate();
  c.slam.validate();
  if (!(c.evaluation.max_dt > 0.0)) bad("evaluation.max_dt must be positive");
  return c;
}

RunConfig load_config(const std::string& path) {
  json j;
  try {
    j = read_json(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  return config_from_json(j);
}

SimRun simulate_from_config(const SimulationConfig& config) {
  const World world = build_world(WorldConfig::preset_named(config.preset, config.world_seed));
  TrajectoryConfig trajectory = TrajectoryConfig::preset_for(config.preset);
  if (config.trajectory == "square") {
    const Vec3 mid = 0.5 * (world.extent.min + world.extent.max);
    trajectory = TrajectoryConfig::square_loop(mid.head<2>(), 1.2);
  }
  SimRun run = simulate_run(world, trajectory, CameraIntrinsics::pepper_forehead(),
                            default_body_to_camera(), config.noise);
  std::vector<ScriptedEvent> events;
  for (const auto& o : config.occlusions) events.emplace_back(o);
  for (const auto& k : config.kidnaps) events.emplace_back(k);
  if (!events.empty()) run = apply_events(run, events);
  return run;
}

}  // namespace odoslam
