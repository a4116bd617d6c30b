#include "odoslam/mapstore.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "odoslam/errors.hpp"
#include "output_file.hpp"

namespace odoslam {

using nlohmann::json;

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::kSlam: return "slam";
    case Mode::kLocalizationOnly: return "localization-only";
    case Mode::kContinueMapping: return "continue-mapping";
  }
  return "?";
}

Mode mode_from_string(const std::string& name) {
  for (auto m : {Mode::kSlam, Mode::kLocalizationOnly, Mode::kContinueMapping}) {
    if (name == to_string(m)) return m;
  }
  throw Error(ErrorCode::kConfig, "unknown mode '" + name + "'");
}

json pose_to_json(const Pose3& pose) {
  const auto seven = pose.to_seven();
  json j;
  j["pose"] = std::vector<double>(seven.begin(), seven.end());
  // The quaternion alone does not reproduce the rotation bit for bit.
  std::vector<double> r;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) r.push_back(pose.rotation()(i, k));
  }
  j["R"] = r;
  return j;
}

namespace {

std::vector<double> numbers(const json& j, std::size_t n, const char* what) {
  if (!j.is_array() || j.size() != n) {
    throw Error(ErrorCode::kSchema, std::string(what) + ": expected " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(ErrorCode::kSchema, std::string(what) + ": not a number");
    out.push_back(v.get<double>());
  }
  return out;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::kSchema, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

}  // namespace

Pose3 pose_from_json(const json& j) {
  const auto seven = numbers(field(j, "pose"), 7, "pose");
  const Pose3 p = Pose3::from_seven(seven);
  if (!j.contains("R")) return p;
  const auto r = numbers(j.at("R"), 9, "R");
  Mat3 R;
  R << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
  if (!(R * R.transpose()).isApprox(Mat3::Identity(), 1e-6) || R.determinant() < 0.0) {
    throw Error(ErrorCode::kSchema, "R is not a rotation");
  }
  return {R, p.translation()};
}

json map_to_json(const MapState& map) {
  json j;
  j["map_version"] = kMapVersion;
  const auto& c = map.camera;
  j["camera"] = {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width},
                 {"height", c.height}, {"min_depth", c.min_depth}, {"max_depth", c.max_depth}};
  j["T_BC"] = pose_to_json(map.T_BC);
  j["unscaled"] = map.unscaled;
  json kfs = json::array();
  for (const auto& [id, kf] : map.keyframes) {
    json obs = json::array();
    for (const auto& o : kf.observations) obs.push_back({o.landmark_id, o.pixel.x(), o.pixel.y()});
    kfs.push_back({{"id", id},
                   {"timestamp", kf.timestamp},
                   {"odom_session", kf.odom_session},
                   {"T_CW", pose_to_json(kf.T_CW)},
                   {"odom_T_OB", pose_to_json(kf.odom_T_OB)},
                   {"observations", obs}});
  }
  j["keyframes"] = kfs;
  json lms = json::array();
  for (const auto& [id, lm] : map.landmarks) {
    lms.push_back({{"id", id},
                   {"xyz", {lm.position.x(), lm.position.y(), lm.position.z()}},
                   {"observers", std::vector<int>(lm.observers.begin(), lm.observers.end())}});
  }
  j["landmarks"] = lms;
  return j;
}

MapState map_from_json(const json& j) {
  const json& version = field(j, "map_version");
  if (!version.is_number_integer()) throw Error(ErrorCode::kSchema, "map_version");
  if (version.get<int>() != kMapVersion) {
    throw Error(ErrorCode::kVersion, "unsupported map_version " + version.dump());
  }
  MapState map;
  try {
    const json& c = field(j, "camera");
    map.camera.fx = field(c, "fx").get<double>();
    map.camera.fy = field(c, "fy").get<double>();
    map.camera.cx = field(c, "cx").get<double>();
    map.camera.cy = field(c, "cy").get<double>();
    map.camera.width = field(c, "width").get<int>();
    map.camera.height = field(c, "height").get<int>();
    map.camera.min_depth = field(c, "min_depth").get<double>();
    map.camera.max_depth = field(c, "max_depth").get<double>();
    map.T_BC = pose_from_json(field(j, "T_BC"));
    map.unscaled = field(j, "unscaled").get<bool>();
    for (const auto& k : field(j, "keyframes")) {
      Keyframe kf;
      kf.id = field(k, "id").get<int>();
      kf.timestamp = field(k, "timestamp").get<double>();
      kf.odom_session = field(k, "odom_session").get<int>();
      kf.T_CW = pose_from_json(field(k, "T_CW"));
      kf.odom_T_OB = pose_from_json(field(k, "odom_T_OB"));
      for (const auto& o : field(k, "observations")) {
        if (!o.is_array() || o.size() != 3) throw Error(ErrorCode::kSchema, "observation");
        kf.observations.push_back({o[0].get<int>(), Vec2(o[1].get<double>(), o[2].get<double>())});
      }
      std::sort(kf.observations.begin(), kf.observations.end(),
                [](const Observation& a, const Observation& b) { return a.landmark_id < b.landmark_id; });
      if (!map.keyframes.emplace(kf.id, std::move(kf)).second) {
        throw Error(ErrorCode::kSchema, "duplicate keyframe id");
      }
    }
    for (const auto& l : field(j, "landmarks")) {
      MapLandmark lm;
      lm.id = field(l, "id").get<int>();
      const auto xyz = numbers(field(l, "xyz"), 3, "xyz");
      lm.position = Vec3(xyz[0], xyz[1], xyz[2]);
      for (const auto& o : field(l, "observers")) {
        const int kf = o.get<int>();
        if (!map.keyframes.count(kf)) throw Error(ErrorCode::kSchema, "observer is not a keyframe");
        lm.observers.insert(kf);
      }
      if (!map.landmarks.emplace(lm.id, std::move(lm)).second) {
        throw Error(ErrorCode::kSchema, "duplicate landmark id");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, e.what());
  }
  map.camera.validate();
  map.rebuild_covisibility();
  return map;
}

void save_map(const MapState& map, const std::filesystem::path& path) {
  if (map.unscaled) throw Error(ErrorCode::kInvalidState, "refusing to save an unscaled map");
  std::ofstream out = open_output(path);
  out << map_to_json(map).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

MapState load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchema, e.what());
  }
  return map_from_json(j);
}

std::uint64_t map_checksum(const MapState& map) {
  const std::string text = map_to_json(map).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double jaccard(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::vector<int> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const double inter = static_cast<double>(common.size());
  return inter / (static_cast<double>(a.size() + b.size()) - inter);
}

std::vector<int> signature(const std::vector<Observation>& observations) {
  std::vector<int> ids;
  ids.reserve(observations.size());
  for (const auto& o : observations) ids.push_back(o.landmark_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

RelocalizationResult relocalize(const MapState& map, const Frame& frame,
                                const RelocalizationOptions& options) {
  RelocalizationResult result;
  const auto sig = signature(frame.observations);
  std::vector<std::pair<double, int>> ranked;
  for (const auto& [id, kf] : map.keyframes) {
    const double s = jaccard(sig, signature(kf.observations));
    if (s >= options.min_overlap) ranked.emplace_back(s, id);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  const int n = std::min<int>(options.max_candidates, static_cast<int>(ranked.size()));
  for (int i = 0; i < n; ++i) {
    const auto [overlap, kf_id] = ranked[i];
    auto est = refine_pose(map, frame.observations, map.keyframe(kf_id).T_CW, options.tracker);
    if (i == 0) {
      result.keyframe_id = kf_id;
      result.overlap = overlap;
    }
    if (est.success) {
      result.success = true;
      result.keyframe_id = kf_id;
      result.overlap = overlap;
      result.estimate = std::move(est);
      return result;
    }
  }
  return result;
}

LoopClosureResult detect_and_close_loop(MapState& map, int new_kf, const InformationMatrices& info,
                                        const BaOptions& ba, const LoopOptions& options) {
  LoopClosureResult result;
  const Keyframe& kf = map.keyframe(new_kf);
  const auto sig = signature(kf.observations);
  for (const auto& [id, other] : map.keyframes) {
    if (id == new_kf || new_kf - id < options.min_keyframe_gap) continue;
    if (map.covisibility.weight(new_kf, id) > 0) continue;
    const double s = jaccard(sig, signature(other.observations));
    if (s >= options.min_overlap && s > result.overlap) {
      result.overlap = s;
      result.candidate = id;
    }
  }
  if (result.candidate < 0) return result;

  std::set<int> group = keyframe_neighborhood(map, new_kf, options.recent_keyframes);
  group.insert(new_kf);
  const auto cand = keyframe_neighborhood(map, result.candidate, options.recent_keyframes);
  group.insert(cand.begin(), cand.end());
  group.insert(result.candidate);
  for (int id : group) {
    for (const auto& o : map.keyframe(id).observations) {
      const auto it = map.landmarks.find(o.landmark_id);
      if (it == map.landmarks.end()) continue;
      if (it->second.observers.insert(id).second) ++result.new_links;
    }
  }
  map.rebuild_covisibility();

  BaOptions opts = ba;
  opts.use_odometry = ba.use_odometry && !map.unscaled;
  result.report = global_bundle_adjust(map, info, opts);
  std::set<int> all;
  for (const auto& [id, lm] : map.landmarks) all.insert(id);
  remove_outlier_observations(map, all, options.pixel_sigma, options.chi2_gate);
  map.rebuild_covisibility();
  result.closed = true;
  return result;
}

}  // namespace odoslam
