#include "odoslam/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "odoslam/config.hpp"
#include "odoslam/errors.hpp"
#include "odoslam/evaluation.hpp"
#include "odoslam/io.hpp"
#include "odoslam/mapstore.hpp"
#include "odoslam/system.hpp"

namespace odoslam {
namespace fs = std::filesystem;

namespace {

// Errors in what the user handed us map to exit code 2; anything that goes
// wrong while the pipeline runs maps to 3.
class PipelineFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool is_config_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kSchema:
    case ErrorCode::kVersion:
    case ErrorCode::kIo:
      return true;
    default:
      return false;
  }
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::kConfig, std::string(what) + " not found: " + path);
}

std::vector<double> parse_numbers(const std::string& text, std::size_t n, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfig, std::string("bad ") + what + " '" + text + "'");
    }
  }
  if (out.size() != n) throw Error(ErrorCode::kConfig, std::string("bad ") + what + " '" + text + "'");
  return out;
}

RunConfig base_config(const std::string& path) {
  if (path.empty()) return {};
  require_file(path, "config");
  return load_config(path);
}

struct SimulateArgs {
  std::string config;
  std::string out;
  std::string preset;
  std::string trajectory;
  std::optional<std::uint64_t> seed;
  bool zero_noise = false;
  std::vector<std::string> occlusions;
  std::vector<std::string> kidnaps;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  RunConfig c = base_config(a.config);
  auto& sim = c.simulation;
  if (!a.preset.empty()) sim.preset = a.preset;
  if (!a.trajectory.empty()) sim.trajectory = a.trajectory;
  if (a.seed) sim.noise.seed = *a.seed;
  if (a.zero_noise) sim.noise = NoiseModel{0.0, 0.0, 0.0, sim.noise.seed};
  for (const auto& o : a.occlusions) {
    const auto v = parse_numbers(o, 2, "occlusion");
    sim.occlusions.push_back({v[0], v[1]});
  }
  for (const auto& k : a.kidnaps) {
    const auto v = parse_numbers(k, 4, "kidnap");
    sim.kidnaps.push_back({v[0], Pose2(v[1], v[2], v[3])});
  }
  config_from_json(config_to_json(c));  // re-validate the overrides
  const SimRun run = simulate_from_config(sim);
  save_run(run, a.out);
  out << "wrote " << a.out << ": " << run.frames.size() << " frames, "
      << run.world.landmarks.size() << " landmarks\n";
  return kExitOk;
}

struct SlamArgs {
  std::string config;
  std::string run;
  std::string out_dir;
  std::string mode;
  std::string map;
  bool no_odometry_factors = false;
  bool pipelined = false;
};

int cmd_slam(const SlamArgs& a, std::ostream& out) {
  RunConfig c = base_config(a.config);
  SystemOptions options = c.slam;
  if (!a.mode.empty()) options.mode = mode_from_string(a.mode);
  if (a.no_odometry_factors) options.odometry_factors = false;
  if (a.pipelined) options.pipelined = true;
  require_file(a.run, "run file");
  std::optional<MapState> map;
  if (options.mode != Mode::kSlam) {
    if (a.map.empty()) throw Error(ErrorCode::kConfig, std::string(to_string(options.mode)) + " mode needs --map");
    require_file(a.map, "map");
    map = load_map(a.map);
  }
  const SimRun run = load_run(a.run);
  fs::create_directories(a.out_dir);

  SlamRunOutput result;
  try {
    result = run_slam(run, options, map);
  } catch (const Error& e) {
    throw PipelineFailure(e.what());
  }
  if (!result.initialized) throw PipelineFailure("initialization never succeeded within the run");
  if (result.records.empty()) throw PipelineFailure("no pose was ever estimated");

  const fs::path dir(a.out_dir);
  write_tracking_log(result.records, dir / "trajectory.csv");
  write_planar_log(result.planar, dir / "planar.csv");
  nlohmann::json report = report_to_json(result.report, result.map, result.log);
  report["mode"] = to_string(options.mode);
  if (map) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(result.report.map_checksum_before));
    report["map_checksum_before"] = buf;
  }
  if (options.mode != Mode::kLocalizationOnly && !result.map.unscaled) {
    save_map(result.map, dir / "map.json");
    report["map_file"] = (dir / "map.json").string();
  }
  write_json(report, dir / "report.json");
  out << "slam: " << result.records.size() << " poses, " << result.map.keyframes.size()
      << " keyframes, " << result.map.landmarks.size() << " landmarks -> " << a.out_dir << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string config;
  std::string run;
  std::string trajectory;
  std::string out;
  std::string plot;
  bool align = false;
  std::optional<double> max_dt;
};

nlohmann::json ate_json(const AteReport& r) {
  return {{"ate", {{"x", r.rmse_x}, {"y", r.rmse_y}, {"z", r.rmse_z}, {"total", r.rmse_total}}},
          {"n_pairs", r.n_pairs},
          {"visual_coverage", r.visual_coverage}};
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  RunConfig c = base_config(a.config);
  const double max_dt = a.max_dt.value_or(c.evaluation.max_dt);
  if (!(max_dt > 0.0)) throw Error(ErrorCode::kConfig, "max-dt must be positive");
  require_file(a.run, "run file");
  require_file(a.trajectory, "trajectory");
  const SimRun run = load_run(a.run);
  const auto records = read_tracking_log(a.trajectory);
  std::vector<PosePair> pairs;
  AteReport ate;
  try {
    ate = evaluate_trajectory(records, run, max_dt, a.align || c.evaluation.align, &pairs);
  } catch (const Error& e) {
    throw PipelineFailure(e.what());
  }
  nlohmann::json report = ate_json(ate);
  report["aligned"] = a.align || c.evaluation.align;
  if (!a.plot.empty()) export_plot_data(pairs, a.plot);
  if (!a.out.empty()) write_json(report, a.out);
  out << report.dump(2) << "\n";
  return kExitOk;
}

struct DemoArgs {
  std::string config;
  std::string out_dir;
  int seeds = 3;
};

int cmd_demo(const DemoArgs& a, std::ostream& out) {
  const RunConfig base = base_config(a.config);
  if (a.seeds < 1) throw Error(ErrorCode::kConfig, "--seeds must be >= 1");
  out << std::left << std::setw(8) << "world" << std::setw(6) << "seed" << std::right
      << std::setw(10) << "ATE x" << std::setw(10) << "ATE y" << std::setw(10) << "ATE z"
      << std::setw(10) << "total" << std::setw(10) << "visual" << "\n";
  for (const char* preset : {"lab", "hall"}) {
    double sum = 0.0;
    for (int s = 1; s <= a.seeds; ++s) {
      RunConfig c = base;
      c.simulation.preset = preset;
      c.simulation.noise.seed = static_cast<std::uint64_t>(s);
      const SimRun run = simulate_from_config(c.simulation);
      SlamRunOutput result;
      try {
        result = run_slam(run, c.slam);
      } catch (const Error& e) {
        throw PipelineFailure(e.what());
      }
      if (!result.initialized) throw PipelineFailure(std::string(preset) + ": initialization failed");
      const AteReport ate = evaluate_trajectory(result.records, run, c.evaluation.max_dt, c.evaluation.align);
      sum += ate.rmse_total;
      out << std::left << std::setw(8) << preset << std::setw(6) << s << std::right << std::fixed
          << std::setprecision(4) << std::setw(10) << ate.rmse_x << std::setw(10) << ate.rmse_y
          << std::setw(10) << ate.rmse_z << std::setw(10) << ate.rmse_total << std::setw(10)
          << ate.visual_coverage << "\n";
      out.unsetf(std::ios::fixed);
      if (!a.out_dir.empty()) {
        const fs::path dir = fs::path(a.out_dir) / (std::string(preset) + "_" + std::to_string(s));
        fs::create_directories(dir);
        write_tracking_log(result.records, dir / "trajectory.csv");
        nlohmann::json report = ate_json(ate);
        report["run"] = report_to_json(result.report, result.map, result.log);
        write_json(report, dir / "report.json");
      }
    }
    out << std::left << std::setw(14) << (std::string(preset) + " mean") << std::right << std::fixed
        << std::setprecision(4) << std::setw(40) << sum / a.seeds << "\n";
    out.unsetf(std::ios::fixed);
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Odometry-aided monocular SLAM: simulator, pipeline and evaluation"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "Print the default config JSON and exit");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic run file");
  simulate->add_option("--config", sim.config, "Config JSON");
  simulate->add_option("--out", sim.out, "Output run file")->required();
  simulate->add_option("--preset", sim.preset, "World preset")->check(CLI::IsMember({"lab", "hall"}));
  simulate->add_option("--trajectory", sim.trajectory, "orbit or square")
      ->check(CLI::IsMember({"orbit", "square"}));
  simulate->add_option("--seed", sim.seed, "Noise seed");
  simulate->add_flag("--zero-noise", sim.zero_noise, "Disable pixel and odometry noise");
  simulate->add_option("--occlusion", sim.occlusions, "Occlusion window T0,T1 (repeatable)");
  simulate->add_option("--kidnap", sim.kidnaps, "Kidnap T,X,Y,YAW (repeatable)");

  SlamArgs slam;
  auto* slam_cmd = app.add_subcommand("slam", "Run the SLAM pipeline on a run file");
  slam_cmd->add_option("--config", slam.config, "Config JSON");
  slam_cmd->add_option("--run", slam.run, "Run file")->required();
  slam_cmd->add_option("--out-dir", slam.out_dir, "Output directory")->required();
  slam_cmd->add_option("--mode", slam.mode, "slam, localization-only or continue-mapping");
  slam_cmd->add_option("--map", slam.map, "Map file for localization-only / continue-mapping");
  slam_cmd->add_flag("--no-odometry-factors", slam.no_odometry_factors,
                     "Bundle adjustment without odometry constraints");
  slam_cmd->add_flag("--pipelined", slam.pipelined, "Run the backend on its own thread");

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "ATE of a trajectory against ground truth");
  eval_cmd->add_option("--config", ev.config, "Config JSON");
  eval_cmd->add_option("--run", ev.run, "Run file with ground truth")->required();
  eval_cmd->add_option("--trajectory", ev.trajectory, "Trajectory CSV")->required();
  eval_cmd->add_option("--out", ev.out, "Report JSON");
  eval_cmd->add_option("--plot", ev.plot, "Plot CSV");
  eval_cmd->add_flag("--align", ev.align, "Planar least-squares alignment before scoring");
  eval_cmd->add_option("--max-dt", ev.max_dt, "Association tolerance in seconds");

  DemoArgs demo;
  auto* demo_cmd = app.add_subcommand("demo", "Lab and hall scenarios end to end, ATE table");
  demo_cmd->add_option("--config", demo.config, "Config JSON");
  demo_cmd->add_option("--out-dir", demo.out_dir, "Keep per-run artifacts here");
  demo_cmd->add_option("--seeds", demo.seeds, "Seeds per world");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (print_defaults) {
      out << config_to_json(RunConfig{}).dump(2) << "\n";
      return kExitOk;
    }
    if (simulate->parsed()) return cmd_simulate(sim, out);
    if (slam_cmd->parsed()) return cmd_slam(slam, out);
    if (eval_cmd->parsed()) return cmd_evaluate(ev, out);
    if (demo_cmd->parsed()) return cmd_demo(demo, out);
    err << app.help();
    return kExitConfig;
  } catch (const PipelineFailure& e) {
    err << "pipeline failure: " << e.what() << "\n";
    return kExitPipeline;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_config_error(e.code()) ? kExitConfig : kExitPipeline;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitPipeline;
  }
}

}  // namespace odoslam
