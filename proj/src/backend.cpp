#include "odoslam/backend.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "odoslam/errors.hpp"

namespace odoslam {

InformationMatrices InformationMatrices::from_sigmas(double pixel_sigma, double trans_sigma,
                                                     double rot_sigma) {
  if (!(pixel_sigma > 0.0) || !(trans_sigma > 0.0) || !(rot_sigma > 0.0)) {
    throw Error(ErrorCode::kConfig, "information sigmas must be positive");
  }
  InformationMatrices info;
  info.omega_vis = Mat2::Identity() / (pixel_sigma * pixel_sigma);
  Vec6 d;
  const double wt = 1.0 / (trans_sigma * trans_sigma);
  const double wr = 1.0 / (rot_sigma * rot_sigma);
  d << wt, wt, wt, wr, wr, wr;
  info.omega_odo = d.asDiagonal();
  return info;
}

namespace {

bool positive_definite(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) return false;
  if (!m.isApprox(m.transpose(), 1e-9)) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

void InformationMatrices::validate() const {
  if (!positive_definite(omega_vis)) throw Error(ErrorCode::kConfig, "omega_vis not SPD");
  if (!positive_definite(omega_odo)) throw Error(ErrorCode::kConfig, "omega_odo not SPD");
}

LocalWindow select_local_window(const MapState& map, int kf_id, int min_weight) {
  map.keyframe(kf_id);
  LocalWindow w;
  w.active_keyframes.insert(kf_id);
  for (int n : map.covisibility.neighbors(kf_id, min_weight)) w.active_keyframes.insert(n);
  for (const auto& [id, lm] : map.landmarks) {
    for (int obs : lm.observers) {
      if (w.active_keyframes.count(obs)) {
        w.active_landmarks.insert(id);
        break;
      }
    }
  }
  for (int id : w.active_landmarks) {
    for (int obs : map.landmarks.at(id).observers) {
      if (!w.active_keyframes.count(obs)) w.fixed_keyframes.insert(obs);
    }
  }
  return w;
}

Pose3 odometry_camera_increment(const Pose3& odom_prev, const Pose3& odom_curr, const Pose3& T_BC) {
  return T_BC.inverse() * relative_pose(odom_prev, odom_curr) * T_BC;
}

Twist6 odometry_residual(const Pose3& T_rel_odo, const Pose3& T_prev_CW, const Pose3& T_curr_CW) {
  return log_se3(T_rel_odo.inverse() * T_prev_CW * T_curr_CW.inverse());
}

OdometryLinearization linearize_odometry(const Pose3& T_rel_odo, const Pose3& T_prev_CW,
                                         const Pose3& T_curr_CW) {
  const Pose3 inv_rel = T_rel_odo.inverse();
  const Twist6 e = log_se3(inv_rel * T_prev_CW * T_curr_CW.inverse());
  OdometryLinearization out;
  out.residual = e.vector();
  // Perturbing the previous pose on the left moves the error through
  // T_rel^-1; the current pose enters inverted, i.e. as a right perturbation.
  out.d_prev = se3_left_jacobian_inverse(e) * adjoint(inv_rel);
  const Twist6 minus_e = Twist6::from_vector(-out.residual);
  out.d_curr = -se3_left_jacobian_inverse(minus_e);
  return out;
}

Vec2 reprojection_residual(const Pose3& T_CW, const Vec3& landmark, const Vec2& pixel,
                           const CameraIntrinsics& camera) {
  return project_point(T_CW * landmark, camera).pixel - pixel;
}

ReprojectionLinearization linearize_reprojection(const Pose3& T_CW, const Vec3& landmark,
                                                 const Vec2& pixel, const CameraIntrinsics& camera) {
  const Vec3 pc = T_CW * landmark;
  ReprojectionLinearization out;
  out.depth = pc.z();
  const double iz = 1.0 / pc.z();
  out.residual = Vec2(camera.fx * pc.x() * iz + camera.cx, camera.fy * pc.y() * iz + camera.cy) - pixel;
  Mat23 jp;
  jp << camera.fx * iz, 0.0, -camera.fx * pc.x() * iz * iz,
        0.0, camera.fy * iz, -camera.fy * pc.y() * iz * iz;
  out.d_pose.leftCols<3>() = jp;
  out.d_pose.rightCols<3>() = -jp * hat(pc);
  out.d_point = jp * T_CW.rotation();
  return out;
}

namespace {

struct PoseVar {
  int kf_id = 0;
  Pose3 T;
  int active = -1;  // index among active poses, -1 when fixed
};

struct VisualTerm {
  int pose = 0;  // index into poses
  int point = 0;
  Vec2 pixel;
};

struct OdoTerm {
  int prev = 0;
  int curr = 0;
  Pose3 T_rel;
};

struct Problem {
  const CameraIntrinsics* camera = nullptr;
  std::vector<PoseVar> poses;
  std::vector<int> point_ids;
  std::vector<Vec3> points;
  std::vector<VisualTerm> visual;
  std::vector<OdoTerm> odo;
  int n_active = 0;
};

double huber_cost(double chi2, double delta) {
  if (chi2 <= delta * delta) return chi2;
  return 2.0 * delta * std::sqrt(chi2) - delta * delta;
}

double huber_weight(double chi2, double delta) {
  if (chi2 <= delta * delta) return 1.0;
  return delta / std::sqrt(chi2);
}

double evaluate(const Problem& p, const std::vector<Pose3>& poses, const std::vector<Vec3>& points,
                const InformationMatrices& info, const BaOptions& opt) {
  double cost = 0.0;
  const auto& cam = *p.camera;
  for (const auto& v : p.visual) {
    const Vec3 pc = poses[v.pose] * points[v.point];
    if (!(pc.z() > opt.min_depth)) return std::numeric_limits<double>::infinity();
    const Vec2 r = project_unchecked(pc, cam) - v.pixel;
    cost += huber_cost(r.dot(info.omega_vis * r), opt.huber_delta);
  }
  for (const auto& o : p.odo) {
    Vec6 e;
    try {
      e = odometry_residual(o.T_rel, poses[o.prev], poses[o.curr]).vector();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
    cost += e.dot(info.omega_odo * e);
  }
  return std::isfinite(cost) ? cost : std::numeric_limits<double>::infinity();
}

struct PointBlock {
  Mat3 H = Mat3::Zero();
  Vec3 g = Vec3::Zero();
  std::vector<std::pair<int, Eigen::Matrix<double, 6, 3>>> coupling;  // (active pose, W)
};

struct NormalEquations {
  Eigen::MatrixXd Hcc;
  Eigen::VectorXd gc;
  std::vector<PointBlock> points;
};

NormalEquations linearize(const Problem& p, const std::vector<Pose3>& poses,
                          const std::vector<Vec3>& points, const InformationMatrices& info,
                          const BaOptions& opt) {
  NormalEquations ne;
  const int nc = 6 * p.n_active;
  ne.Hcc = Eigen::MatrixXd::Zero(nc, nc);
  ne.gc = Eigen::VectorXd::Zero(nc);
  ne.points.resize(points.size());
  for (const auto& v : p.visual) {
    const auto lin = linearize_reprojection(poses[v.pose], points[v.point], v.pixel, *p.camera);
    const double chi2 = lin.residual.dot(info.omega_vis * lin.residual);
    const double w = huber_weight(chi2, opt.huber_delta);
    const Mat2 wo = w * info.omega_vis;
    auto& pb = ne.points[v.point];
    pb.H += lin.d_point.transpose() * wo * lin.d_point;
    pb.g += lin.d_point.transpose() * wo * lin.residual;
    const int a = p.poses[v.pose].active;
    if (a >= 0) {
      ne.Hcc.block<6, 6>(6 * a, 6 * a) += lin.d_pose.transpose() * wo * lin.d_pose;
      ne.gc.segment<6>(6 * a) += lin.d_pose.transpose() * wo * lin.residual;
      pb.coupling.emplace_back(a, lin.d_pose.transpose() * wo * lin.d_point);
    }
  }
  for (const auto& o : p.odo) {
    const auto lin = linearize_odometry(o.T_rel, poses[o.prev], poses[o.curr]);
    const int a = p.poses[o.prev].active;
    const int b = p.poses[o.curr].active;
    const Mat6& om = info.omega_odo;
    if (a >= 0) {
      ne.Hcc.block<6, 6>(6 * a, 6 * a) += lin.d_prev.transpose() * om * lin.d_prev;
      ne.gc.segment<6>(6 * a) += lin.d_prev.transpose() * om * lin.residual;
    }
    if (b >= 0) {
      ne.Hcc.block<6, 6>(6 * b, 6 * b) += lin.d_curr.transpose() * om * lin.d_curr;
      ne.gc.segment<6>(6 * b) += lin.d_curr.transpose() * om * lin.residual;
    }
    if (a >= 0 && b >= 0) {
      const Mat6 hab = lin.d_prev.transpose() * om * lin.d_curr;
      ne.Hcc.block<6, 6>(6 * a, 6 * b) += hab;
      ne.Hcc.block<6, 6>(6 * b, 6 * a) += hab.transpose();
    }
  }
  return ne;
}

// Damped Schur-complement solve. Returns false when the reduced camera system
// is not positive definite.
bool solve_step(const NormalEquations& ne, double lambda, Eigen::VectorXd& dc,
                std::vector<Vec3>& dp) {
  const auto damp = [lambda](double d) { return lambda * std::max(d, 1e-9); };
  Eigen::MatrixXd S = ne.Hcc;
  for (int i = 0; i < S.rows(); ++i) S(i, i) += damp(ne.Hcc(i, i));
  Eigen::VectorXd rhs = -ne.gc;
  std::vector<Mat3> hinv(ne.points.size());
  for (std::size_t j = 0; j < ne.points.size(); ++j) {
    const auto& pb = ne.points[j];
    Mat3 h = pb.H;
    for (int k = 0; k < 3; ++k) h(k, k) += damp(pb.H(k, k));
    Eigen::LDLT<Mat3> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
    hinv[j] = ldlt.solve(Mat3::Identity());
    for (const auto& [ai, wi] : pb.coupling) {
      const Eigen::Matrix<double, 6, 3> t = wi * hinv[j];
      rhs.segment<6>(6 * ai) += t * pb.g;
      for (const auto& [ak, wk] : pb.coupling) S.block<6, 6>(6 * ai, 6 * ak) -= t * wk.transpose();
    }
  }
  if (S.rows() > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) return false;
    dc = llt.solve(rhs);
    if (!dc.allFinite()) return false;
  } else {
    dc.resize(0);
  }
  dp.resize(ne.points.size());
  for (std::size_t j = 0; j < ne.points.size(); ++j) {
    Vec3 b = -ne.points[j].g;
    for (const auto& [ai, wi] : ne.points[j].coupling) b -= wi.transpose() * dc.segment<6>(6 * ai);
    dp[j] = hinv[j] * b;
    if (!dp[j].allFinite()) return false;
  }
  return true;
}

Problem build_problem(const MapState& map, const LocalWindow& window, const BaOptions& opt,
                      SolveReport& report) {
  Problem p;
  p.camera = &map.camera;
  std::map<int, int> slot;
  for (int id : window.active_keyframes) {
    if (window.fixed_keyframes.count(id)) {
      throw Error(ErrorCode::kInvalidState, "keyframe both active and fixed");
    }
    slot[id] = static_cast<int>(p.poses.size());
    p.poses.push_back({id, map.keyframe(id).T_CW, p.n_active++});
  }
  for (int id : window.fixed_keyframes) {
    slot[id] = static_cast<int>(p.poses.size());
    p.poses.push_back({id, map.keyframe(id).T_CW, -1});
  }
  for (int lm_id : window.active_landmarks) {
    const auto it = map.landmarks.find(lm_id);
    if (it == map.landmarks.end()) throw Error(ErrorCode::kNotFound, "landmark");
    const int pi = static_cast<int>(p.points.size());
    bool used = false;
    for (int kf : it->second.observers) {
      const auto s = slot.find(kf);
      if (s == slot.end()) continue;
      const Observation* obs = map.keyframe(kf).find(lm_id);
      if (obs == nullptr) continue;
      const Vec3 pc = p.poses[s->second].T * it->second.position;
      if (!(pc.z() > opt.min_depth)) {
        report.behind_camera.emplace_back(kf, lm_id);
        continue;
      }
      p.visual.push_back({s->second, pi, obs->pixel});
      used = true;
    }
    if (used) {
      p.point_ids.push_back(lm_id);
      p.points.push_back(it->second.position);
    }
  }
  if (opt.use_odometry) {
    std::set<std::pair<int, int>> pairs;
    for (int id : window.active_keyframes) {
      if (auto prev = map.previous_in_session(id)) pairs.emplace(*prev, id);
      if (auto next = map.next_in_session(id)) pairs.emplace(id, *next);
    }
    for (const auto& [a, b] : pairs) {
      for (int id : {a, b}) {
        if (!slot.count(id)) {
          slot[id] = static_cast<int>(p.poses.size());
          p.poses.push_back({id, map.keyframe(id).T_CW, -1});
        }
      }
      const Keyframe& ka = map.keyframe(a);
      const Keyframe& kb = map.keyframe(b);
      OdoTerm term{slot[a], slot[b], odometry_camera_increment(ka.odom_T_OB, kb.odom_T_OB, map.T_BC)};
      try {
        linearize_odometry(term.T_rel, ka.T_CW, kb.T_CW);
      } catch (const Error&) {
        ++report.dropped_odometry;
        continue;
      }
      p.odo.push_back(term);
    }
  }
  return p;
}

}  // namespace

SolveReport bundle_adjust(MapState& map, const LocalWindow& window, const InformationMatrices& info,
                          const BaOptions& options) {
  if (window.active_keyframes.empty()) throw Error(ErrorCode::kInvalidState, "no active keyframe");
  if (options.use_odometry && map.unscaled) {
    throw Error(ErrorCode::kInvalidState, "odometry factors need a metric map");
  }
  SolveReport report;
  report.kf_id = *window.active_keyframes.rbegin();
  Problem p = build_problem(map, window, options, report);
  report.n_active = p.n_active;
  report.n_fixed = static_cast<int>(p.poses.size()) - p.n_active;
  report.n_landmarks = static_cast<int>(p.points.size());
  report.n_visual = static_cast<int>(p.visual.size());
  report.n_odometry = static_cast<int>(p.odo.size());

  std::vector<Pose3> poses;
  for (const auto& pv : p.poses) poses.push_back(pv.T);
  std::vector<Vec3> points = p.points;

  double cost = evaluate(p, poses, points, info, options);
  report.cost0 = cost;
  report.cost1 = cost;
  report.accepted_costs.push_back(cost);
  if (!std::isfinite(cost)) {
    report.status = "failed";
    return report;
  }
  if (cost < 1e-18) return report;

  double lambda = options.initial_lambda;
  bool converged = false;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const NormalEquations ne = linearize(p, poses, points, info, options);
    bool accepted = false;
    bool any_solved = false;
    for (int attempt = 0; attempt <= options.max_lambda_increases; ++attempt) {
      Eigen::VectorXd dc;
      std::vector<Vec3> dp;
      if (!solve_step(ne, lambda, dc, dp)) {
        lambda *= 10.0;
        continue;
      }
      any_solved = true;
      std::vector<Pose3> trial_poses = poses;
      std::vector<Vec3> trial_points = points;
      for (std::size_t i = 0; i < p.poses.size(); ++i) {
        const int a = p.poses[i].active;
        if (a < 0) continue;
        trial_poses[i] = exp_se3(Twist6::from_vector(dc.segment<6>(6 * a))) * poses[i];
      }
      for (std::size_t j = 0; j < points.size(); ++j) trial_points[j] += dp[j];
      const double trial = evaluate(p, trial_poses, trial_points, info, options);
      if (trial < cost) {
        const double rel = (cost - trial) / cost;
        poses = std::move(trial_poses);
        points = std::move(trial_points);
        cost = trial;
        report.accepted_costs.push_back(cost);
        ++report.iters;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        converged = rel < options.min_relative_decrease || cost < 1e-18;
        break;
      }
      lambda *= 4.0;
    }
    if (!any_solved) {
      report.status = "failed";
      report.cost1 = report.cost0;
      report.accepted_costs.resize(1);
      report.iters = 0;
      return report;
    }
    if (!accepted) {
      converged = true;
    }
    if (converged) break;
  }
  report.status = converged ? "converged" : "max_iterations";
  report.cost1 = cost;
  for (std::size_t i = 0; i < p.poses.size(); ++i) {
    if (p.poses[i].active >= 0) map.keyframe(p.poses[i].kf_id).T_CW = poses[i].renormalized();
  }
  for (std::size_t j = 0; j < points.size(); ++j) map.landmarks.at(p.point_ids[j]).position = points[j];
  return report;
}

SolveReport global_bundle_adjust(MapState& map, const InformationMatrices& info,
                                 const BaOptions& options) {
  if (map.keyframes.size() < 2) throw Error(ErrorCode::kInvalidState, "global BA needs two keyframes");
  LocalWindow w;
  w.fixed_keyframes.insert(map.keyframes.begin()->first);
  for (auto it = std::next(map.keyframes.begin()); it != map.keyframes.end(); ++it) {
    w.active_keyframes.insert(it->first);
  }
  for (const auto& [id, lm] : map.landmarks) w.active_landmarks.insert(id);
  return bundle_adjust(map, w, info, options);
}

double window_cost(const MapState& map, const LocalWindow& window, const InformationMatrices& info,
                   const BaOptions& options) {
  SolveReport scratch;
  const Problem p = build_problem(map, window, options, scratch);
  std::vector<Pose3> poses;
  for (const auto& pv : p.poses) poses.push_back(pv.T);
  return evaluate(p, poses, p.points, info, options);
}

Vec3 triangulate_midpoint(const Vec3& origin_a, const Vec3& dir_a, const Vec3& origin_b,
                          const Vec3& dir_b) {
  // Closest points origin_a + s dir_a and origin_b + t dir_b.
  const Vec3 w = origin_a - origin_b;
  const double a = dir_a.dot(dir_a);
  const double b = dir_a.dot(dir_b);
  const double c = dir_b.dot(dir_b);
  const double d = dir_a.dot(w);
  const double e = dir_b.dot(w);
  const double den = a * c - b * b;
  if (std::abs(den) < 1e-15) {
    throw Error(ErrorCode::kDegenerateMotion, "parallel rays");
  }
  const double s = (b * e - c * d) / den;
  const double t = (a * e - b * d) / den;
  return 0.5 * ((origin_a + s * dir_a) + (origin_b + t * dir_b));
}

Vec3 refine_point(const Vec3& initial, const std::vector<std::pair<Pose3, Vec2>>& views,
                  const CameraIntrinsics& camera, int iterations) {
  Vec3 x = initial;
  for (int it = 0; it < iterations; ++it) {
    Mat3 H = Mat3::Zero();
    Vec3 g = Vec3::Zero();
    for (const auto& [T, px] : views) {
      const auto lin = linearize_reprojection(T, x, px, camera);
      if (!(lin.depth > 1e-6)) return x;
      H += lin.d_point.transpose() * lin.d_point;
      g += lin.d_point.transpose() * lin.residual;
    }
    Eigen::LDLT<Mat3> ldlt(H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return x;
    const Vec3 dx = -ldlt.solve(g);
    if (!dx.allFinite()) return x;
    x += dx;
    if (dx.norm() < 1e-12 * (1.0 + x.norm())) break;
  }
  return x;
}

std::set<int> keyframe_neighborhood(const MapState& map, int kf_id, int recent) {
  std::set<int> out;
  for (int n : map.covisibility.neighbors(kf_id, 1)) out.insert(n);
  auto it = map.keyframes.find(kf_id);
  for (int k = 0; k < recent && it != map.keyframes.begin(); ++k) {
    --it;
    out.insert(it->first);
  }
  out.erase(kf_id);
  return out;
}

namespace {

bool passes_gate(const Pose3& T_CW, const Vec3& x, const Vec2& px, const CameraIntrinsics& camera,
                 double pixel_sigma, double chi2_gate, double min_depth) {
  const Vec3 pc = T_CW * x;
  if (!(pc.z() > min_depth)) return false;
  const Vec2 r = project_unchecked(pc, camera) - px;
  return r.squaredNorm() <= chi2_gate * pixel_sigma * pixel_sigma;
}

}  // namespace

int triangulate_new_points(MapState& map, int new_kf, const TriangulationOptions& options) {
  const Keyframe& kf = map.keyframe(new_kf);
  const std::set<int> candidates = keyframe_neighborhood(map, new_kf, options.recent_keyframes);
  const double min_cos = std::cos(options.min_parallax_deg * std::numbers::pi / 180.0);
  const Mat3 R_new = kf.T_CW.rotation().transpose();
  const Vec3 c_new = camera_center(kf.T_CW);
  int added = 0;
  for (const auto& obs : kf.observations) {
    if (map.has_landmark(obs.landmark_id)) continue;
    std::vector<std::pair<Pose3, Vec2>> views{{kf.T_CW, obs.pixel}};
    std::vector<int> observers{new_kf};
    const Vec3 d_new = (R_new * map.camera.unproject(obs.pixel)).normalized();
    double best_cos = 2.0;
    Vec3 best_c, best_d;
    for (int c : candidates) {
      const Keyframe& other = map.keyframe(c);
      const Observation* o = other.find(obs.landmark_id);
      if (o == nullptr) continue;
      views.emplace_back(other.T_CW, o->pixel);
      observers.push_back(c);
      const Vec3 d = (other.T_CW.rotation().transpose() * map.camera.unproject(o->pixel)).normalized();
      const double cosang = d.dot(d_new);
      if (cosang < best_cos) {
        best_cos = cosang;
        best_c = camera_center(other.T_CW);
        best_d = d;
      }
    }
    if (observers.size() < 2 || best_cos > min_cos) continue;
    Vec3 x;
    try {
      x = triangulate_midpoint(c_new, d_new, best_c, best_d);
    } catch (const Error&) {
      continue;
    }
    x = refine_point(x, views, map.camera);
    bool ok = x.allFinite();
    for (std::size_t i = 0; ok && i < views.size(); ++i) {
      ok = passes_gate(views[i].first, x, views[i].second, map.camera, options.pixel_sigma,
                       options.chi2_gate, options.min_depth);
    }
    if (!ok) continue;
    MapLandmark lm;
    lm.id = obs.landmark_id;
    lm.position = x;
    lm.observers.insert(observers.begin(), observers.end());
    for (int o : observers) {
      for (int p : observers) {
        if (o < p) map.covisibility.add(o, p, 1);
      }
    }
    map.landmarks.emplace(lm.id, std::move(lm));
    ++added;
  }
  return added;
}

int fuse_observations(MapState& map, int kf_id, const std::set<int>& neighborhood,
                      double pixel_sigma, double chi2_gate) {
  const Keyframe& kf = map.keyframe(kf_id);
  int fused = 0;
  for (const auto& obs : kf.observations) {
    const auto it = map.landmarks.find(obs.landmark_id);
    if (it == map.landmarks.end() || it->second.observers.count(kf_id)) continue;
    const bool nearby = std::any_of(it->second.observers.begin(), it->second.observers.end(),
                                    [&](int o) { return neighborhood.count(o) != 0; });
    if (!nearby) continue;
    if (!passes_gate(kf.T_CW, it->second.position, obs.pixel, map.camera, pixel_sigma, chi2_gate,
                     1e-6)) {
      continue;
    }
    for (int o : it->second.observers) map.covisibility.add(kf_id, o, 1);
    it->second.observers.insert(kf_id);
    ++fused;
  }
  return fused;
}

int remove_outlier_observations(MapState& map, const std::set<int>& landmark_ids,
                                double pixel_sigma, double chi2_gate, double min_depth) {
  int removed = 0;
  for (int id : landmark_ids) {
    const auto it = map.landmarks.find(id);
    if (it == map.landmarks.end()) continue;
    auto& lm = it->second;
    for (auto o = lm.observers.begin(); o != lm.observers.end();) {
      const Keyframe& kf = map.keyframe(*o);
      const Observation* obs = kf.find(id);
      if (obs == nullptr ||
          !passes_gate(kf.T_CW, lm.position, obs->pixel, map.camera, pixel_sigma, chi2_gate,
                       min_depth)) {
        o = lm.observers.erase(o);
        ++removed;
      } else {
        ++o;
      }
    }
  }
  if (removed > 0) {
    map.cull_landmarks(2);
    map.rebuild_covisibility();
  }
  return removed;
}

}  // namespace odoslam
