#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "odoslam/geometry.hpp"

namespace odoslam {

struct TimedPose {
  double t = 0.0;
  Pose3 pose;
  bool visual = true;  // estimate came from visual tracking
};

struct PosePair {
  double t = 0.0;  // estimate timestamp
  Pose3 estimate;
  Pose3 truth;
  bool visual = true;
};

/// Nearest-timestamp pairing within max_dt; each ground-truth sample is used
/// at most once (the closest estimate wins). Throws kNoOverlap when nothing
/// pairs up.
std::vector<PosePair> associate(std::span<const TimedPose> estimate,
                                std::span<const TimedPose> truth, double max_dt = 0.02);

/// Expresses the estimates in the ground-truth frame by matching the first
/// pair exactly: every estimate is premultiplied by truth_0 * estimate_0^-1.
std::vector<PosePair> anchor_first(std::span<const PosePair> pairs);

/// Planar rigid alignment (x, y, yaw) minimizing the squared horizontal
/// distance between aligned estimates and ground truth.
Pose2 align_se2(std::span<const PosePair> pairs);
std::vector<PosePair> apply_alignment(std::span<const PosePair> pairs, const Pose2& alignment);

struct AteReport {
  double rmse_x = 0.0;
  double rmse_y = 0.0;
  double rmse_z = 0.0;
  double rmse_total = 0.0;
  int n_pairs = 0;
  double visual_coverage = 0.0;  // fraction of pairs estimated visually
};

AteReport compute_ate(std::span<const PosePair> pairs);

/// CSV: t, estimate xyz, ground-truth xyz, visual flag.
void export_plot_data(std::span<const PosePair> pairs, const std::filesystem::path& path);

struct PlotRow {
  double t = 0.0;
  Vec3 estimate;
  Vec3 truth;
  bool visual = true;
};
std::vector<PlotRow> load_plot_data(const std::filesystem::path& path);

}  // namespace odoslam
