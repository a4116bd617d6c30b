#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "odoslam/geometry.hpp"
#include "odoslam/simworld.hpp"

namespace odoslam {

struct Keyframe {
  int id = 0;
  double timestamp = 0.0;
  Pose3 T_CW;       // world -> camera
  Pose3 odom_T_OB;  // body in odometry frame, same timestamp as the image
  // Odometry factors only link keyframes of the same session; a loaded map
  // continued in a new run starts a new odometry frame.
  int odom_session = 0;
  // Every raw observation of the image, sorted by landmark id. Whether an
  // observation is a factor is decided by the landmark's observer set.
  std::vector<Observation> observations;

  const Observation* find(int landmark_id) const;
  std::set<int> observed_ids() const;
};

struct MapLandmark {
  int id = 0;
  Vec3 position = Vec3::Zero();
  std::set<int> observers;  // keyframe ids whose observation of this id is a factor
};

/// Keyframe graph weighted by shared landmark counts; stored in both
/// directions.
class Covisibility {
 public:
  int weight(int a, int b) const;
  /// Neighbors with weight >= min_weight, sorted by id.
  std::vector<int> neighbors(int kf, int min_weight = 1) const;
  const std::map<int, std::map<int, int>>& adjacency() const { return adjacency_; }

  void clear() { adjacency_.clear(); }
  void add(int a, int b, int count);

  friend bool operator==(const Covisibility&, const Covisibility&) = default;

 private:
  std::map<int, std::map<int, int>> adjacency_;
};

struct MapState {
  CameraIntrinsics camera;
  Pose3 T_BC;
  std::map<int, Keyframe> keyframes;
  std::map<int, MapLandmark> landmarks;
  Covisibility covisibility;
  bool unscaled = true;

  const Keyframe& keyframe(int id) const;
  Keyframe& keyframe(int id);
  bool has_landmark(int id) const { return landmarks.count(id) != 0; }
  int next_keyframe_id() const { return keyframes.empty() ? 0 : keyframes.rbegin()->first + 1; }

  /// Landmark ids whose observer set contains `kf`.
  std::vector<int> associated_landmarks(int kf) const;
  /// Recomputes covisibility weights from the landmark observer sets.
  void rebuild_covisibility();
  /// Removes landmarks with fewer than `min_observers` observers.
  int cull_landmarks(int min_observers = 2);
  /// Keyframe that precedes `kf` in creation order within the same odometry
  /// session.
  std::optional<int> previous_in_session(int kf) const;
  std::optional<int> next_in_session(int kf) const;
};

bool operator==(const Keyframe& a, const Keyframe& b);
bool operator==(const MapLandmark& a, const MapLandmark& b);
bool operator==(const MapState& a, const MapState& b);

}  // namespace odoslam
