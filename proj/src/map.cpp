#include "odoslam/map.hpp"

#include <algorithm>
#include <string>

#include "odoslam/errors.hpp"

namespace odoslam {

const Observation* Keyframe::find(int landmark_id) const {
  const auto it = std::lower_bound(
      observations.begin(), observations.end(), landmark_id,
      [](const Observation& o, int id) { return o.landmark_id < id; });
  if (it == observations.end() || it->landmark_id != landmark_id) return nullptr;
  return &*it;
}

std::set<int> Keyframe::observed_ids() const {
  std::set<int> ids;
  for (const auto& o : observations) ids.insert(o.landmark_id);
  return ids;
}

int Covisibility::weight(int a, int b) const {
  const auto it = adjacency_.find(a);
  if (it == adjacency_.end()) return 0;
  const auto jt = it->second.find(b);
  return jt == it->second.end() ? 0 : jt->second;
}

std::vector<int> Covisibility::neighbors(int kf, int min_weight) const {
  std::vector<int> out;
  const auto it = adjacency_.find(kf);
  if (it == adjacency_.end()) return out;
  for (const auto& [other, w] : it->second) {
    if (w >= min_weight) out.push_back(other);
  }
  return out;
}

void Covisibility::add(int a, int b, int count) {
  adjacency_[a][b] += count;
  adjacency_[b][a] += count;
}

const Keyframe& MapState::keyframe(int id) const {
  const auto it = keyframes.find(id);
  if (it == keyframes.end()) throw Error(ErrorCode::kNotFound, "keyframe " + std::to_string(id));
  return it->second;
}

Keyframe& MapState::keyframe(int id) {
  const auto it = keyframes.find(id);
  if (it == keyframes.end()) throw Error(ErrorCode::kNotFound, "keyframe " + std::to_string(id));
  return it->second;
}

std::vector<int> MapState::associated_landmarks(int kf) const {
  std::vector<int> out;
  for (const auto& [id, lm] : landmarks) {
    if (lm.observers.count(kf)) out.push_back(id);
  }
  return out;
}

void MapState::rebuild_covisibility() {
  covisibility.clear();
  for (const auto& [id, lm] : landmarks) {
    for (auto a = lm.observers.begin(); a != lm.observers.end(); ++a) {
      for (auto b = std::next(a); b != lm.observers.end(); ++b) covisibility.add(*a, *b, 1);
    }
  }
}

int MapState::cull_landmarks(int min_observers) {
  int removed = 0;
  for (auto it = landmarks.begin(); it != landmarks.end();) {
    if (static_cast<int>(it->second.observers.size()) < min_observers) {
      it = landmarks.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return removed;
}

std::optional<int> MapState::previous_in_session(int kf) const {
  const auto it = keyframes.find(kf);
  if (it == keyframes.end() || it == keyframes.begin()) return std::nullopt;
  const auto prev = std::prev(it);
  if (prev->second.odom_session != it->second.odom_session) return std::nullopt;
  return prev->first;
}

std::optional<int> MapState::next_in_session(int kf) const {
  const auto it = keyframes.find(kf);
  if (it == keyframes.end()) return std::nullopt;
  const auto next = std::next(it);
  if (next == keyframes.end() || next->second.odom_session != it->second.odom_session) {
    return std::nullopt;
  }
  return next->first;
}

bool operator==(const Keyframe& a, const Keyframe& b) {
  if (a.id != b.id || a.timestamp != b.timestamp || !(a.T_CW == b.T_CW) ||
      !(a.odom_T_OB == b.odom_T_OB) || a.odom_session != b.odom_session ||
      a.observations.size() != b.observations.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.observations.size(); ++i) {
    if (a.observations[i].landmark_id != b.observations[i].landmark_id ||
        a.observations[i].pixel != b.observations[i].pixel) {
      return false;
    }
  }
  return true;
}

bool operator==(const MapLandmark& a, const MapLandmark& b) {
  return a.id == b.id && a.position == b.position && a.observers == b.observers;
}

bool operator==(const MapState& a, const MapState& b) {
  const auto& ka = a.camera;
  const auto& kb = b.camera;
  const bool same_camera = ka.fx == kb.fx && ka.fy == kb.fy && ka.cx == kb.cx && ka.cy == kb.cy &&
                           ka.width == kb.width && ka.height == kb.height &&
                           ka.min_depth == kb.min_depth && ka.max_depth == kb.max_depth;
  return same_camera && a.T_BC == b.T_BC && a.keyframes == b.keyframes &&
         a.landmarks == b.landmarks && a.covisibility == b.covisibility && a.unscaled == b.unscaled;
}

}  // namespace odoslam
