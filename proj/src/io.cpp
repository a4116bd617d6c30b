#include "odoslam/io.hpp"

#include <array>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "odoslam/errors.hpp"
#include "output_file.hpp"
#include "odoslam/mapstore.hpp"

namespace odoslam {

using nlohmann::json;

namespace {

json camera_to_json(const CameraIntrinsics& c) {
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width},
          {"height", c.height}, {"min_depth", c.min_depth}, {"max_depth", c.max_depth}};
}

CameraIntrinsics camera_from_json(const json& j) {
  CameraIntrinsics c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.min_depth = j.at("min_depth").get<double>();
  c.max_depth = j.at("max_depth").get<double>();
  c.validate();
  return c;
}

json vec3_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kSchema, "expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

json run_to_json(const SimRun& run) {
  json j;
  j["sim_version"] = kSimVersion;
  json lms = json::array();
  for (const auto& l : run.world.landmarks) lms.push_back({l.id, l.position.x(), l.position.y(), l.position.z()});
  j["world"] = {{"name", run.world.name},
                {"extent_min", vec3_json(run.world.extent.min)},
                {"extent_max", vec3_json(run.world.extent.max)},
                {"landmarks", lms}};
  j["camera"] = camera_to_json(run.camera);
  j["T_BC"] = pose_to_json(run.T_BC);
  j["noise"] = {{"pixel_sigma", run.noise.pixel_sigma},
                {"odom_trans_sigma", run.noise.odom_trans_sigma},
                {"odom_rot_sigma", run.noise.odom_rot_sigma},
                {"seed", run.noise.seed}};
  json gt = json::array();
  for (const auto& g : run.ground_truth) {
    json e = pose_to_json(g.body_pose);
    e["t"] = g.timestamp;
    gt.push_back(e);
  }
  j["ground_truth"] = gt;
  json frames = json::array();
  for (const auto& f : run.frames) {
    json obs = json::array();
    for (const auto& o : f.observations) obs.push_back({o.landmark_id, o.pixel.x(), o.pixel.y()});
    json e = pose_to_json(f.odometry_pose);
    e["t"] = f.timestamp;
    e["observations"] = obs;
    if (f.gt_discontinuity) e["gt_discontinuity"] = true;
    frames.push_back(e);
  }
  j["frames"] = frames;
  return j;
}

SimRun run_from_json(const json& j) {
  if (!j.is_object() || !j.contains("sim_version")) throw Error(ErrorCode::kSchema, "missing sim_version");
  if (!j.at("sim_version").is_number_integer() || j.at("sim_version").get<int>() != kSimVersion) {
    throw Error(ErrorCode::kVersion, "unsupported sim_version " + j.at("sim_version").dump());
  }
  SimRun run;
  try {
    const json& w = j.at("world");
    run.world.name = w.at("name").get<std::string>();
    run.world.extent.min = vec3_from(w.at("extent_min"));
    run.world.extent.max = vec3_from(w.at("extent_max"));
    for (const auto& l : w.at("landmarks")) {
      if (!l.is_array() || l.size() != 4) throw Error(ErrorCode::kSchema, "landmark entry");
      run.world.landmarks.push_back(
          {l[0].get<int>(), {l[1].get<double>(), l[2].get<double>(), l[3].get<double>()}});
    }
    run.camera = camera_from_json(j.at("camera"));
    run.T_BC = pose_from_json(j.at("T_BC"));
    const json& n = j.at("noise");
    run.noise.pixel_sigma = n.at("pixel_sigma").get<double>();
    run.noise.odom_trans_sigma = n.at("odom_trans_sigma").get<double>();
    run.noise.odom_rot_sigma = n.at("odom_rot_sigma").get<double>();
    run.noise.seed = n.at("seed").get<std::uint64_t>();
    for (const auto& g : j.at("ground_truth")) {
      run.ground_truth.push_back({g.at("t").get<double>(), pose_from_json(g)});
    }
    for (const auto& e : j.at("frames")) {
      Frame f;
      f.timestamp = e.at("t").get<double>();
      f.odometry_pose = pose_from_json(e);
      f.gt_discontinuity = e.value("gt_discontinuity", false);
      for (const auto& o : e.at("observations")) {
        if (!o.is_array() || o.size() != 3) throw Error(ErrorCode::kSchema, "observation entry");
        f.observations.push_back({o[0].get<int>(), {o[1].get<double>(), o[2].get<double>()}});
      }
      run.frames.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, e.what());
  }
  return run;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchema, path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

void save_run(const SimRun& run, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << run_to_json(run).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

SimRun load_run(const std::filesystem::path& path) { return run_from_json(read_json(path)); }

void write_tracking_log(const std::vector<TrackingRecord>& records,
                        const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "t,status,tx,ty,tz,qx,qy,qz,qw\n" << std::setprecision(17);
  for (const auto& r : records) {
    const auto s = r.T_MB.to_seven();
    out << r.t << ',' << to_string(r.status);
    for (double v : s) out << ',' << v;
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::vector<TrackingRecord> read_tracking_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "t,status,tx,ty,tz,qx,qy,qz,qw") throw Error(ErrorCode::kSchema, "unexpected log header");
  std::vector<TrackingRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw Error(ErrorCode::kSchema, "log row needs 9 columns");
    TrackingRecord r;
    std::array<double, 7> seven{};
    try {
      r.t = std::stod(cells[0]);
      for (int i = 0; i < 7; ++i) seven[i] = std::stod(cells[2 + i]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kSchema, "bad number in log row");
    }
    r.status = track_status_from_string(cells[1]);
    r.T_MB = Pose3::from_seven(seven);
    out.push_back(r);
  }
  return out;
}

void write_planar_log(const std::vector<LocalizationOutput>& outputs,
                      const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "t,source,map_x,map_y,map_yaw,corr_x,corr_y,corr_yaw\n" << std::setprecision(17);
  for (const auto& o : outputs) {
    out << o.timestamp << ',' << to_string(o.source) << ',' << o.body_in_map.x << ','
        << o.body_in_map.y << ',' << o.body_in_map.yaw << ',' << o.map_to_odom.x << ','
        << o.map_to_odom.y << ',' << o.map_to_odom.yaw << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace odoslam
