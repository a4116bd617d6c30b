#include "odoslam/system.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "odoslam/errors.hpp"
#include "odoslam/scaleinit.hpp"

namespace odoslam {

void SystemOptions::set_pixel_sigma(double sigma) {
  tracker.pixel_sigma = sigma;
  initializer.pixel_sigma = sigma;
  triangulation.pixel_sigma = sigma;
  relocalization.tracker.pixel_sigma = sigma;
  loop.pixel_sigma = sigma;
}

InformationMatrices SystemOptions::information() const {
  return InformationMatrices::from_sigmas(pixel_sigma(), odom_trans_sigma, odom_rot_sigma);
}

void SystemOptions::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kConfig, what);
  };
  information().validate();
  require(scale_keyframes >= 2, "scale_keyframes must be >= 2");
  require(max_pending_keyframes >= 1, "max_pending_keyframes must be >= 1");
  require(max_frames_ahead >= 0, "max_frames_ahead must be >= 0");
  require(covisibility_threshold >= 1, "covisibility_threshold must be >= 1");
  require(local_map_recent >= 0, "local_map_recent must be >= 0");
  require(tracker.min_inliers >= 6, "min_inliers must be >= 6");
  require(tracker.chi2_gate > 0.0, "chi2_gate must be positive");
  require(keyframes.min_translation > 0.0 && keyframes.min_rotation > 0.0,
          "keyframe thresholds must be positive");
  require(keyframes.min_tracked_ratio >= 0.0 && keyframes.min_tracked_ratio <= 1.0,
          "keyframe tracked ratio must be in [0, 1]");
  require(ba.max_iterations >= 1, "ba max_iterations must be >= 1");
  require(triangulation.min_parallax_deg > 0.0, "min_parallax_deg must be positive");
  require(relocalization.min_overlap > 0.0 && relocalization.min_overlap <= 1.0,
          "relocalization overlap must be in (0, 1]");
  require(loop.min_overlap > 0.0 && loop.min_overlap <= 1.0, "loop overlap must be in (0, 1]");
}

SlamSystem::SlamSystem(const CameraIntrinsics& camera, const Pose3& T_BC, SystemOptions options)
    : options_(std::move(options)) {
  options_.validate();
  camera.validate();
  if (options_.mode != Mode::kSlam) {
    throw Error(ErrorCode::kInvalidState, "a fresh session runs in slam mode; other modes need a map");
  }
  map_.camera = camera;
  map_.T_BC = T_BC;
  map_.unscaled = true;
  if (options_.pipelined) worker_ = std::thread([this] { backend_loop(); });
}

SlamSystem::SlamSystem(MapState map, SystemOptions options)
    : options_(std::move(options)), map_(std::move(map)) {
  options_.validate();
  if (map_.unscaled) throw Error(ErrorCode::kInvalidState, "loaded map is not metric");
  if (map_.keyframes.empty()) throw Error(ErrorCode::kInvalidState, "loaded map has no keyframes");
  report_.map_checksum_before = map_checksum(map_);
  initialized_ = true;
  frontend_metric_ = true;
  state_.status = TrackStatus::kLost;
  for (const auto& [id, kf] : map_.keyframes) session_ = std::max(session_, kf.odom_session + 1);
  next_kf_id_ = map_.next_keyframe_id();
  if (options_.mode == Mode::kSlam) options_.mode = Mode::kContinueMapping;
  if (options_.pipelined) worker_ = std::thread([this] { backend_loop(); });
}

SlamSystem::~SlamSystem() {
  if (worker_.joinable()) {
    {
      std::lock_guard lock(queue_mutex_);
      stop_ = true;
    }
    queue_cv_.notify_all();
    worker_.join();
  }
}

void SlamSystem::set_mode(Mode mode) {
  if (mode == options_.mode) return;
  if (mode != Mode::kSlam || options_.mode == Mode::kLocalizationOnly) {
    finish();
    std::shared_lock lock(map_mutex_);
    if (!initialized_ || map_.unscaled) {
      throw Error(ErrorCode::kInvalidState, "mode switch needs an initialized metric map");
    }
  }
  if (options_.mode == Mode::kLocalizationOnly) ++session_;
  options_.mode = mode;
}

void SlamSystem::process(const Frame& frame) {
  if (!initialized_) {
    try_initialize(frame);
    return;
  }
  track(frame);
}

void SlamSystem::try_initialize(const Frame& frame) {
  const int min_shared = options_.initializer.min_shared;
  if (!init_reference_) {
    if (static_cast<int>(frame.observations.size()) >= min_shared) init_reference_ = frame;
    return;
  }
  InitializationResult result;
  try {
    result = initialize_two_view(*init_reference_, frame, map_.camera, map_.T_BC,
                                 options_.initializer);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kInitializationRefused) throw;
    const auto a = signature(init_reference_->observations);
    const auto b = signature(frame.observations);
    std::vector<int> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    if (static_cast<int>(common.size()) < min_shared) {
      if (static_cast<int>(frame.observations.size()) >= min_shared) {
        init_reference_ = frame;
      } else {
        init_reference_.reset();
      }
    }
    return;
  }
  const Frame& ref = *init_reference_;
  {
    std::unique_lock lock(map_mutex_);
    map_ = std::move(result.map);
  }
  result.report.kf_id = 1;
  report_.local_solves.push_back(result.report);

  const Keyframe& k0 = map_.keyframe(0);
  const Keyframe& k1 = map_.keyframe(1);
  const double visual = (camera_center(k1.T_CW) - camera_center(k0.T_CW)).norm();
  const double metric =
      odometry_camera_increment(k0.odom_T_OB, k1.odom_T_OB, map_.T_BC).translation().norm();
  map_units_per_meter_ = metric > 1e-9 ? visual / metric : 1.0;

  state_.status = TrackStatus::kTrackingVisual;
  state_.timestamp = frame.timestamp;
  state_.T_CW = k1.T_CW;
  state_.odom_T_OB = frame.odometry_pose;
  state_.inlier_ids = map_.associated_landmarks(1);
  state_.inlier_count = static_cast<int>(state_.inlier_ids.size());
  log_.push_back({ref.timestamp, TrackStatus::kTrackingVisual, k0.T_CW, ref.odometry_pose});
  log_.push_back({frame.timestamp, TrackStatus::kTrackingVisual, k1.T_CW, frame.odometry_pose});

  initialized_ = true;
  init_reference_.reset();
  last_kf_ = 1;
  reference_kf_ = 1;
  last_kf_odom_ = frame.odometry_pose;
  last_kf_tracked_ = state_.inlier_count;
  next_kf_id_ = 2;
}

std::set<int> SlamSystem::local_landmarks() const {
  std::set<int> kfs;
  if (map_.keyframes.count(reference_kf_)) {
    kfs.insert(reference_kf_);
    for (int n : map_.covisibility.neighbors(reference_kf_, 1)) kfs.insert(n);
  }
  int k = 0;
  for (auto it = map_.keyframes.rbegin(); it != map_.keyframes.rend() && k < options_.local_map_recent;
       ++it, ++k) {
    kfs.insert(it->first);
  }
  std::set<int> out;
  for (const auto& [id, lm] : map_.landmarks) {
    for (int o : lm.observers) {
      if (kfs.count(o)) {
        out.insert(id);
        break;
      }
    }
  }
  return out;
}

void SlamSystem::update_reference(const std::vector<int>& inliers) {
  std::map<int, int> votes;
  for (int id : inliers) {
    const auto it = map_.landmarks.find(id);
    if (it == map_.landmarks.end()) continue;
    for (int o : it->second.observers) ++votes[o];
  }
  int best = -1;
  int best_votes = 0;
  for (const auto& [kf, v] : votes) {
    if (v > best_votes) {
      best = kf;
      best_votes = v;
    }
  }
  if (best >= 0) reference_kf_ = best;
}

void SlamSystem::apply_pending_scale() {
  if (!pending_scale_) return;
  const double s = *pending_scale_;
  pending_scale_.reset();
  const auto rescale = [s](Pose3& T) { T = Pose3(T.rotation(), T.translation() * s); };
  for (auto& e : log_) rescale(e.T_CW);
  rescale(state_.T_CW);
  map_units_per_meter_ = 1.0;
  frontend_metric_ = true;
}

bool SlamSystem::try_relocalize(const Frame& frame) {
  if (frame.observations.empty()) return false;
  auto r = relocalize(map_, frame, options_.relocalization);
  if (!r.success) return false;
  state_.status = TrackStatus::kTrackingVisual;
  state_.T_CW = r.estimate.T_CW;
  state_.inlier_count = r.estimate.inlier_count;
  state_.inlier_ids = std::move(r.estimate.inlier_ids);
  state_.timestamp = frame.timestamp;
  state_.odom_T_OB = frame.odometry_pose;
  reference_kf_ = r.keyframe_id;
  ++report_.relocalizations;
  return true;
}

void SlamSystem::track(const Frame& frame) {
  if (options_.pipelined && ++frames_since_submit_ > options_.max_frames_ahead) finish();
  bool visual = false;
  {
    std::shared_lock lock(map_mutex_);
    apply_pending_scale();
    if (!localized_once_ && options_.mode != Mode::kSlam) {
      // Loaded map: nothing is known until the first relocalization.
      if (!try_relocalize(frame)) return;
      localized_once_ = true;
      visual = true;
    } else {
      std::set<int> usable = local_landmarks();
      TrackState next = track_frame(map_, frame, state_, options_.tracker, map_units_per_meter_, &usable);
      if (next.status != TrackStatus::kTrackingVisual && backend_busy()) {
        // The keyframe covering this view may still be in the backend.
        lock.unlock();
        finish();
        lock.lock();
        apply_pending_scale();
        usable = local_landmarks();
        next = track_frame(map_, frame, state_, options_.tracker, map_units_per_meter_, &usable);
      }
      if (next.status == TrackStatus::kTrackingVisual) {
        state_ = std::move(next);
        visual = true;
      } else if (try_relocalize(frame)) {
        visual = true;
      } else {
        state_ = std::move(next);
      }
    }
    localized_once_ = true;
    if (visual) update_reference(state_.inlier_ids);
    log_.push_back({frame.timestamp, state_.status, state_.T_CW, frame.odometry_pose});
  }
  maybe_insert_keyframe(frame, visual);
  if (!options_.pipelined) {
    std::shared_lock lock(map_mutex_);
    apply_pending_scale();
  }
}

void SlamSystem::maybe_insert_keyframe(const Frame& frame, bool visual) {
  if (options_.mode == Mode::kLocalizationOnly) return;
  if (visual) {
    int base = last_kf_tracked_;
    {
      std::shared_lock lock(map_mutex_);
      if (map_.keyframes.count(last_kf_)) {
        base = static_cast<int>(map_.associated_landmarks(last_kf_).size());
      }
    }
    if (last_kf_ >= 0 && !decide_keyframe(state_, last_kf_odom_, base, options_.keyframes)) return;
  } else {
    // Vision lost in a place the map does not cover yet: anchor a keyframe
    // on the odometry prediction so new points can be triangulated.
    if (static_cast<int>(frame.observations.size()) < options_.initializer.min_shared) return;
    const Pose3 motion = relative_pose(last_kf_odom_, frame.odometry_pose);
    if (motion.translation().norm() < options_.keyframes.min_translation &&
        rotation_angle(motion.rotation()) < options_.keyframes.min_rotation) {
      return;
    }
    ++report_.bridge_keyframes;
  }
  KeyframeJob job;
  job.keyframe = Keyframe{next_kf_id_++, frame.timestamp, state_.T_CW, frame.odometry_pose, session_,
                          frame.observations};
  job.tracked = visual ? state_.inlier_ids : std::vector<int>{};
  job.metric = frontend_metric_;
  last_kf_ = job.keyframe.id;
  last_kf_odom_ = frame.odometry_pose;
  last_kf_tracked_ = visual ? state_.inlier_count : 0;
  reference_kf_ = job.keyframe.id;
  submit(std::move(job));
}

void SlamSystem::submit(KeyframeJob job) {
  if (!options_.pipelined) {
    std::unique_lock lock(map_mutex_);
    map_keyframe(std::move(job));
    return;
  }
  {
    // Frames arrive as fast as the caller feeds them, so the frontend would
    // otherwise run arbitrarily far ahead of the map it tracks against.
    std::unique_lock lock(queue_mutex_);
    idle_cv_.wait(lock, [this] {
      return static_cast<int>(queue_.size()) + in_flight_ < options_.max_pending_keyframes;
    });
    queue_.push_back(std::move(job));
    frames_since_submit_ = 0;
  }
  queue_cv_.notify_one();
}

void SlamSystem::backend_loop() {
  for (;;) {
    KeyframeJob job;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
      if (queue_.empty()) return;
      job = std::move(queue_.front());
      queue_.pop_front();
      ++in_flight_;
    }
    {
      std::unique_lock lock(map_mutex_);
      map_keyframe(std::move(job));
    }
    {
      std::lock_guard lock(queue_mutex_);
      --in_flight_;
    }
    idle_cv_.notify_all();
  }
}

bool SlamSystem::backend_busy() {
  if (!options_.pipelined) return false;
  std::lock_guard lock(queue_mutex_);
  return !queue_.empty() || in_flight_ > 0;
}

void SlamSystem::finish() {
  if (!options_.pipelined) return;
  std::unique_lock lock(queue_mutex_);
  idle_cv_.wait(lock, [this] { return queue_.empty() && in_flight_ == 0; });
}

void SlamSystem::map_keyframe(KeyframeJob job) {
  Keyframe kf = std::move(job.keyframe);
  if (!job.metric && !map_.unscaled && report_.scale) {
    // Created before the scale event but mapped after it.
    kf.T_CW = Pose3(kf.T_CW.rotation(), kf.T_CW.translation() * report_.scale->s);
  }
  const int id = kf.id;
  map_.keyframes.emplace(id, std::move(kf));
  for (int lm_id : job.tracked) {
    const auto it = map_.landmarks.find(lm_id);
    if (it == map_.landmarks.end() || !map_.keyframe(id).find(lm_id)) continue;
    for (int o : it->second.observers) map_.covisibility.add(id, o, 1);
    it->second.observers.insert(id);
  }
  const double sigma = options_.pixel_sigma();
  const double gate = options_.tracker.chi2_gate;
  fuse_observations(map_, id, keyframe_neighborhood(map_, id, options_.local_map_recent), sigma, gate);
  triangulate_new_points(map_, id, options_.triangulation);

  const InformationMatrices info = options_.information();
  BaOptions ba = options_.ba;
  ba.use_odometry = options_.odometry_factors && !map_.unscaled;
  LocalWindow window = select_local_window(map_, id, options_.covisibility_threshold);
  const int gauge = map_.keyframes.begin()->first;
  if (window.active_keyframes.erase(gauge)) window.fixed_keyframes.insert(gauge);
  if (!window.active_keyframes.empty()) {
    SolveReport r = bundle_adjust(map_, window, info, ba);
    r.kf_id = id;
    report_.local_solves.push_back(std::move(r));
  }
  remove_outlier_observations(map_, window.active_landmarks, sigma, gate);

  if (map_.unscaled) {
    if (static_cast<int>(map_.keyframes.size()) < options_.scale_keyframes) return;
    ScaleEstimate est;
    try {
      est = estimate_scale(map_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateMotion) throw;
      return;
    }
    map_ = apply_scale(map_, est.scale);
    ba.use_odometry = options_.odometry_factors;
    SolveReport r = global_bundle_adjust(map_, info, ba);
    r.kf_id = id;
    report_.global_solves.push_back(std::move(r));
    std::set<int> all;
    for (const auto& [lm_id, lm] : map_.landmarks) all.insert(lm_id);
    remove_outlier_observations(map_, all, sigma, gate);
    report_.scale = ScaleEvent{map_.keyframe(id).timestamp, est.scale, est.keyframes_used};
    pending_scale_ = est.scale;
    return;
  }
  if (options_.loop_closure) {
    LoopClosureResult loop = detect_and_close_loop(map_, id, info, ba, options_.loop);
    if (loop.closed) {
      ++report_.loop_closures;
      loop.report.kf_id = id;
      report_.global_solves.push_back(std::move(loop.report));
    }
  }
}

std::vector<TrackingRecord> SlamSystem::tracking_records() const {
  std::vector<TrackingRecord> out;
  const Pose3 T_MW = map_from_world(map_.T_BC);
  for (const auto& e : log_) {
    out.push_back({e.t, e.status, T_MW * camera_to_body(e.T_CW, map_.T_BC)});
  }
  return out;
}

std::vector<LocalizationOutput> SlamSystem::planar_outputs() const {
  LocalizationPublisher publisher;
  std::vector<LocalizationOutput> out;
  const auto records = tracking_records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto source = records[i].status == TrackStatus::kTrackingVisual
                            ? LocalizationSource::kVisual
                            : LocalizationSource::kOdometryOnly;
    out.push_back(publisher.update(records[i].t, records[i].T_MB, log_[i].odom_T_OB, source));
  }
  return out;
}

namespace {

nlohmann::json solve_json(const SolveReport& r) {
  return {{"kf_id", r.kf_id},         {"n_active", r.n_active},   {"n_fixed", r.n_fixed},
          {"n_landmarks", r.n_landmarks}, {"n_visual", r.n_visual}, {"n_odometry", r.n_odometry},
          {"cost0", r.cost0},         {"cost1", r.cost1},         {"iters", r.iters},
          {"status", r.status},       {"accepted_costs", r.accepted_costs}};
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

nlohmann::json report_to_json(const RunReport& report, const MapState& map,
                              const std::vector<TrackingEntry>& log) {
  nlohmann::json j;
  j["keyframes"] = map.keyframes.size();
  j["landmarks"] = map.landmarks.size();
  j["metric"] = !map.unscaled;
  if (report.scale) {
    j["scale_event"] = {{"t", report.scale->t}, {"s", report.scale->s}, {"N", report.scale->n}};
  } else {
    j["scale_event"] = nullptr;
  }
  j["loop_closures"] = report.loop_closures;
  j["relocalizations"] = report.relocalizations;
  j["bridge_keyframes"] = report.bridge_keyframes;
  std::map<std::string, int> counts;
  for (const auto& e : log) ++counts[to_string(e.status)];
  j["status_counts"] = counts;
  nlohmann::json local = nlohmann::json::array();
  for (const auto& r : report.local_solves) local.push_back(solve_json(r));
  nlohmann::json global = nlohmann::json::array();
  for (const auto& r : report.global_solves) global.push_back(solve_json(r));
  j["local_ba"] = local;
  j["global_ba"] = global;
  j["map_checksum"] = hex(map_checksum(map));
  return j;
}

SlamRunOutput run_slam(const SimRun& run, const SystemOptions& options,
                       std::optional<MapState> map) {
  std::unique_ptr<SlamSystem> system;
  if (map) {
    system = std::make_unique<SlamSystem>(std::move(*map), options);
  } else {
    system = std::make_unique<SlamSystem>(run.camera, run.T_BC, options);
  }
  for (const auto& frame : run.frames) system->process(frame);
  system->finish();
  SlamRunOutput out;
  out.initialized = system->initialized();
  out.map = system->map();
  out.log = system->log();
  out.records = system->tracking_records();
  out.planar = system->planar_outputs();
  out.report = system->report();
  return out;
}

std::vector<TimedPose> estimate_trajectory(const std::vector<TrackingRecord>& records) {
  std::vector<TimedPose> out;
  for (const auto& r : records) {
    out.push_back({r.t, r.T_MB, r.status == TrackStatus::kTrackingVisual});
  }
  return out;
}

std::vector<TimedPose> ground_truth_trajectory(const SimRun& run) {
  std::vector<TimedPose> out;
  for (const auto& g : run.ground_truth) out.push_back({g.timestamp, g.body_pose, true});
  return out;
}

AteReport evaluate_trajectory(const std::vector<TrackingRecord>& records, const SimRun& run,
                              double max_dt, bool align, std::vector<PosePair>* pairs_out) {
  const auto est = estimate_trajectory(records);
  const auto gt = ground_truth_trajectory(run);
  auto pairs = associate(est, gt, max_dt);
  pairs = anchor_first(pairs);
  if (align) pairs = apply_alignment(pairs, align_se2(pairs));
  if (pairs_out != nullptr) *pairs_out = pairs;
  return compute_ate(pairs);
}

}  // namespace odoslam
