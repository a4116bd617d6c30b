#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <thread>
#include <vector>

#include "json.hpp"
#include "odoslam/backend.hpp"
#include "odoslam/evaluation.hpp"
#include "odoslam/frontend.hpp"
#include "odoslam/io.hpp"
#include "odoslam/map.hpp"
#include "odoslam/mapstore.hpp"
#include "odoslam/planarloc.hpp"

namespace odoslam {

struct SystemOptions {
  Mode mode = Mode::kSlam;
  bool pipelined = false;
  // Pipelined mode: keyframes queued or being mapped before the frontend blocks.
  int max_pending_keyframes = 1;
  // Pipelined mode: frames tracked past an unmapped keyframe before the
  // frontend waits for the backend. Bounds mapping latency when frames are fed
  // faster than real time.
  int max_frames_ahead = 1;
  bool odometry_factors = true;
  bool loop_closure = true;
  int scale_keyframes = 10;
  int covisibility_threshold = 15;
  int local_map_recent = 5;
  // Expected odometry error over one keyframe interval.
  double odom_trans_sigma = 0.006;
  double odom_rot_sigma = 0.0025;

  TrackerOptions tracker;
  KeyframePolicy keyframes;
  InitializerOptions initializer;
  TriangulationOptions triangulation;
  BaOptions ba;
  RelocalizationOptions relocalization;
  LoopOptions loop;

  /// Pixel sigma shared by every visual gate and weight.
  void set_pixel_sigma(double sigma);
  double pixel_sigma() const { return tracker.pixel_sigma; }
  InformationMatrices information() const;
  void validate() const;
};

struct TrackingEntry {
  double t = 0.0;
  TrackStatus status = TrackStatus::kTrackingVisual;
  Pose3 T_CW;
  Pose3 odom_T_OB;
};

struct ScaleEvent {
  double t = 0.0;
  double s = 1.0;
  int n = 0;
};

struct RunReport {
  std::vector<SolveReport> local_solves;
  std::vector<SolveReport> global_solves;
  std::optional<ScaleEvent> scale;
  int loop_closures = 0;
  int relocalizations = 0;
  int bridge_keyframes = 0;
  std::uint64_t map_checksum_before = 0;
};

nlohmann::json report_to_json(const RunReport& report, const MapState& map,
                              const std::vector<TrackingEntry>& log);

/// Frontend/backend pipeline over a stream of frames. Synchronous by default:
/// each keyframe is fully mapped before the next frame is tracked. With
/// `pipelined`, keyframes go through an ordered queue to a backend thread and
/// the frontend tracks against whatever map state is current.
class SlamSystem {
 public:
  /// Fresh SLAM session.
  SlamSystem(const CameraIntrinsics& camera, const Pose3& T_BC, SystemOptions options);
  /// Session on a loaded map (LocalizationOnly or ContinueMapping).
  SlamSystem(MapState map, SystemOptions options);
  ~SlamSystem();

  SlamSystem(const SlamSystem&) = delete;
  SlamSystem& operator=(const SlamSystem&) = delete;

  void process(const Frame& frame);
  /// Waits for queued keyframes; call before reading results.
  void finish();

  /// Switching to LocalizationOnly freezes the map; leaving it requires a
  /// metric map.
  void set_mode(Mode mode);
  Mode mode() const { return options_.mode; }

  bool initialized() const { return initialized_; }
  TrackStatus status() const { return state_.status; }
  const MapState& map() const { return map_; }
  const std::vector<TrackingEntry>& log() const { return log_; }
  const RunReport& report() const { return report_; }
  const SystemOptions& options() const { return options_; }

  /// Body poses in the map frame, one per log entry.
  std::vector<TrackingRecord> tracking_records() const;
  /// Planar localization outputs (map->odom correction held through
  /// odometry-only stretches), one per log entry.
  std::vector<LocalizationOutput> planar_outputs() const;

 private:
  void try_initialize(const Frame& frame);
  void track(const Frame& frame);
  bool try_relocalize(const Frame& frame);
  std::set<int> local_landmarks() const;
  void update_reference(const std::vector<int>& inliers);
  void maybe_insert_keyframe(const Frame& frame, bool visual);
  bool backend_busy();
  void apply_pending_scale();

  struct KeyframeJob {
    Keyframe keyframe;
    std::vector<int> tracked;
    bool metric = false;  // pose expressed in metric units already
  };
  void map_keyframe(KeyframeJob job);
  void submit(KeyframeJob job);
  void backend_loop();

  SystemOptions options_;
  MapState map_;
  mutable std::shared_mutex map_mutex_;

  bool initialized_ = false;
  bool localized_once_ = false;
  bool frontend_metric_ = false;
  std::optional<Frame> init_reference_;
  TrackState state_;
  double map_units_per_meter_ = 1.0;
  int reference_kf_ = -1;
  int last_kf_ = -1;
  Pose3 last_kf_odom_;
  int last_kf_tracked_ = 0;
  int session_ = 0;
  int next_kf_id_ = 0;

  std::vector<TrackingEntry> log_;
  RunReport report_;

  // Written by the backend, consumed by the frontend.
  std::optional<double> pending_scale_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<KeyframeJob> queue_;
  bool stop_ = false;
  int in_flight_ = 0;
  int frames_since_submit_ = 0;
  std::condition_variable idle_cv_;
  std::thread worker_;
};

struct SlamRunOutput {
  bool initialized = false;
  MapState map;
  std::vector<TrackingEntry> log;
  std::vector<TrackingRecord> records;
  std::vector<LocalizationOutput> planar;
  RunReport report;
};

/// Feeds every frame of a simulated run through a SlamSystem. With `map`, the
/// session starts on that map (localization-only or continue-mapping).
SlamRunOutput run_slam(const SimRun& run, const SystemOptions& options,
                       std::optional<MapState> map = std::nullopt);

std::vector<TimedPose> estimate_trajectory(const std::vector<TrackingRecord>& records);
std::vector<TimedPose> ground_truth_trajectory(const SimRun& run);

/// Pairs the estimate with ground truth, anchors it on the first pair (or
/// aligns it in SE(2) when `align`), and computes the ATE.
AteReport evaluate_trajectory(const std::vector<TrackingRecord>& records, const SimRun& run,
                              double max_dt = 0.02, bool align = false,
                              std::vector<PosePair>* pairs_out = nullptr);

}  // namespace odoslam
