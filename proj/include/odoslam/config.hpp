#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "odoslam/simworld.hpp"
#include "odoslam/system.hpp"

namespace odoslam {

inline constexpr int kConfigVersion = 1;

struct SimulationConfig {
  std::string preset = "lab";
  std::uint64_t world_seed = 7;
  std::string trajectory = "orbit";  // orbit | square
  NoiseModel noise;
  std::vector<OcclusionEvent> occlusions;
  std::vector<KidnapEvent> kidnaps;
};

struct EvaluationConfig {
  double max_dt = 0.02;
  bool align = false;
};

struct RunConfig {
  SimulationConfig simulation;
  SystemOptions slam;
  EvaluationConfig evaluation;
};

nlohmann::json config_to_json(const RunConfig& config);
/// Values override the defaults key by key. Unknown keys, wrong types, a
/// missing or unsupported "config_version" and invalid values throw kConfig.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Builds the world, trajectory and events of a simulation config and runs it.
SimRun simulate_from_config(const SimulationConfig& config);

}  // namespace odoslam
