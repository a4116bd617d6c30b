#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "odoslam/cli.hpp"
#include "odoslam/config.hpp"
#include "odoslam/errors.hpp"
#include "odoslam/evaluation.hpp"
#include "odoslam/geometry.hpp"
#include "odoslam/io.hpp"
#include "odoslam/system.hpp"

namespace py = pybind11;
using namespace odoslam;

namespace {

// JSON crosses the boundary as text; the package wrapper parses it.
std::string simulate(const std::string& config_json) {
  const RunConfig cfg = config_from_json(nlohmann::json::parse(config_json));
  return run_to_json(simulate_from_config(cfg.simulation)).dump();
}

std::string slam(const std::string& config_json, const std::string& run_json) {
  const RunConfig cfg = config_from_json(nlohmann::json::parse(config_json));
  const SimRun run = run_json.empty() ? simulate_from_config(cfg.simulation)
                                      : run_from_json(nlohmann::json::parse(run_json));
  SlamRunOutput out;
  {
    py::gil_scoped_release release;
    out = run_slam(run, cfg.slam);
  }
  nlohmann::json j;
  j["initialized"] = out.initialized;
  j["report"] = report_to_json(out.report, out.map, out.log);
  j["ate"] = nullptr;
  if (out.initialized) {
    const AteReport a = evaluate_trajectory(out.records, run, cfg.evaluation.max_dt, cfg.evaluation.align);
    j["ate"] = {{"rmse_x", a.rmse_x},         {"rmse_y", a.rmse_y}, {"rmse_z", a.rmse_z},
                {"rmse_total", a.rmse_total}, {"n_pairs", a.n_pairs}, {"visual_coverage", a.visual_coverage}};
  }
  return j.dump();
}

py::dict ate(const Eigen::MatrixX3d& estimate, const Eigen::MatrixX3d& truth, std::vector<bool> visual) {
  if (estimate.rows() != truth.rows()) throw Error(ErrorCode::kConfig, "estimate and truth differ in length");
  if (visual.empty()) visual.assign(static_cast<std::size_t>(estimate.rows()), true);
  if (visual.size() != static_cast<std::size_t>(estimate.rows())) {
    throw Error(ErrorCode::kConfig, "visual flags differ in length");
  }
  std::vector<PosePair> pairs;
  for (Eigen::Index i = 0; i < estimate.rows(); ++i) {
    pairs.push_back({static_cast<double>(i), Pose3(Mat3::Identity(), estimate.row(i).transpose()),
                     Pose3(Mat3::Identity(), truth.row(i).transpose()), visual[static_cast<std::size_t>(i)]});
  }
  const AteReport a = compute_ate(pairs);
  py::dict d;
  d["rmse_x"] = a.rmse_x;
  d["rmse_y"] = a.rmse_y;
  d["rmse_z"] = a.rmse_z;
  d["rmse_total"] = a.rmse_total;
  d["n_pairs"] = a.n_pairs;
  d["visual_coverage"] = a.visual_coverage;
  return d;
}

py::tuple cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"odoslam"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "odometry-aided monocular SLAM core";

  static py::exception<Error> error(m, "OdoslamError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    } catch (const nlohmann::json::exception& e) {
      py::set_error(error, (std::string("config error: ") + e.what()).c_str());
    }
  });

  m.attr("config_version") = kConfigVersion;

  m.def("exp_se3", [](const Vec6& xi) { return exp_se3(Twist6::from_vector(xi)).matrix(); }, py::arg("xi"),
        "4x4 transform of a twist ordered (rho, phi).");
  m.def("log_se3", [](const Mat4& T) { return log_se3(Pose3(T.topLeftCorner<3, 3>(), T.topRightCorner<3, 1>())).vector(); },
        py::arg("T"));
  m.def("default_config", [] { return config_to_json(RunConfig{}).dump(); });
  m.def("simulate", &simulate, py::arg("config_json"));
  m.def("slam", &slam, py::arg("config_json"), py::arg("run_json") = std::string());
  m.def("ate", &ate, py::arg("estimate"), py::arg("truth"), py::arg("visual") = std::vector<bool>{});
  m.def("cli", &cli, py::arg("args"), "Runs the command-line tool; returns (exit code, stdout, stderr).");
}
