#include "odoslam/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include "odoslam/errors.hpp"
#include "output_file.hpp"

namespace odoslam {

std::vector<PosePair> associate(std::span<const TimedPose> estimate,
                                std::span<const TimedPose> truth, double max_dt) {
  std::vector<double> gt_t;
  for (const auto& g : truth) gt_t.push_back(g.t);
  if (!std::is_sorted(gt_t.begin(), gt_t.end())) {
    throw Error(ErrorCode::kSchema, "ground truth must be sorted by time");
  }
  // For every ground-truth sample, the closest estimate so far.
  std::vector<int> owner(truth.size(), -1);
  std::vector<double> owner_dt(truth.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double t = estimate[i].t;
    const auto it = std::lower_bound(gt_t.begin(), gt_t.end(), t);
    int best = -1;
    double best_dt = std::numeric_limits<double>::infinity();
    if (it != gt_t.begin()) {
      best = static_cast<int>(it - gt_t.begin()) - 1;
      best_dt = t - gt_t[best];
    }
    if (it != gt_t.end() && *it - t < best_dt) {
      best = static_cast<int>(it - gt_t.begin());
      best_dt = *it - t;
    }
    if (best < 0 || best_dt > max_dt) continue;
    if (best_dt < owner_dt[best]) {
      owner[best] = static_cast<int>(i);
      owner_dt[best] = best_dt;
    }
  }
  std::vector<std::pair<int, int>> matched;
  for (std::size_t g = 0; g < truth.size(); ++g) {
    if (owner[g] >= 0) matched.emplace_back(owner[g], static_cast<int>(g));
  }
  std::sort(matched.begin(), matched.end());
  if (matched.empty()) throw Error(ErrorCode::kNoOverlap, "no estimate within max_dt of ground truth");
  std::vector<PosePair> out;
  for (const auto& [e, g] : matched) {
    out.push_back({estimate[e].t, estimate[e].pose, truth[g].pose, estimate[e].visual});
  }
  return out;
}

std::vector<PosePair> anchor_first(std::span<const PosePair> pairs) {
  std::vector<PosePair> out(pairs.begin(), pairs.end());
  if (out.empty()) return out;
  const Pose3 T = out.front().truth * out.front().estimate.inverse();
  for (auto& p : out) p.estimate = T * p.estimate;
  return out;
}

Pose2 align_se2(std::span<const PosePair> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::kNoOverlap, "nothing to align");
  Vec2 me = Vec2::Zero();
  Vec2 mg = Vec2::Zero();
  for (const auto& p : pairs) {
    me += p.estimate.translation().head<2>();
    mg += p.truth.translation().head<2>();
  }
  me /= static_cast<double>(pairs.size());
  mg /= static_cast<double>(pairs.size());
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& p : pairs) {
    const Vec2 e = p.estimate.translation().head<2>() - me;
    const Vec2 g = p.truth.translation().head<2>() - mg;
    sxx += e.dot(g);
    sxy += e.x() * g.y() - e.y() * g.x();
  }
  const double yaw = std::atan2(sxy, sxx);
  const Eigen::Rotation2Dd R(yaw);
  const Vec2 t = mg - R * me;
  return {t.x(), t.y(), yaw};
}

std::vector<PosePair> apply_alignment(std::span<const PosePair> pairs, const Pose2& alignment) {
  std::vector<PosePair> out(pairs.begin(), pairs.end());
  const Pose3 T = alignment.to_pose3();
  for (auto& p : out) p.estimate = T * p.estimate;
  return out;
}

AteReport compute_ate(std::span<const PosePair> pairs) {
  AteReport r;
  r.n_pairs = static_cast<int>(pairs.size());
  if (pairs.empty()) return r;
  Vec3 sq = Vec3::Zero();
  int visual = 0;
  for (const auto& p : pairs) {
    sq += (p.estimate.translation() - p.truth.translation()).cwiseAbs2();
    visual += p.visual;
  }
  const double n = static_cast<double>(pairs.size());
  r.rmse_x = std::sqrt(sq.x() / n);
  r.rmse_y = std::sqrt(sq.y() / n);
  r.rmse_z = std::sqrt(sq.z() / n);
  r.rmse_total = std::sqrt(sq.sum() / n);
  r.visual_coverage = visual / n;
  return r;
}

void export_plot_data(std::span<const PosePair> pairs, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "t,est_x,est_y,est_z,gt_x,gt_y,gt_z,visual\n" << std::setprecision(17);
  for (const auto& p : pairs) {
    const Vec3& e = p.estimate.translation();
    const Vec3& g = p.truth.translation();
    out << p.t << ',' << e.x() << ',' << e.y() << ',' << e.z() << ',' << g.x() << ',' << g.y()
        << ',' << g.z() << ',' << (p.visual ? 1 : 0) << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::vector<PlotRow> load_plot_data(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,est_x", 0) != 0) throw Error(ErrorCode::kSchema, "unexpected plot header");
  std::vector<PlotRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorCode::kSchema, "bad plot cell '" + cell + "'");
      }
    }
    if (v.size() != 8) throw Error(ErrorCode::kSchema, "plot row needs 8 columns");
    rows.push_back({v[0], {v[1], v[2], v[3]}, {v[4], v[5], v[6]}, v[7] != 0.0});
  }
  return rows;
}

}  // namespace odoslam
