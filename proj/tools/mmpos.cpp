// Command-line front end: scenario simulation, channel estimation from
// tensor files, BS calibration, per-frame localization, incidence-point
// mapping, evaluation, and the full pipeline. Exit code 0 on success;
// failures print a stage-tagged error and exit nonzero.

#include <CLI11.hpp>

#include <mmpos/pipeline.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace mmpos;

namespace {

ScenarioConfig load_scenario(const std::string& path) {
  const io::json j = io::load_json(path);
  io::check_schema(j, path);
  return io::scenario_from_json(j);
}

/// Accepts either a scenario file or a calibration result: both carry a
/// top-level "bs" object.
BSState load_bs_state(const std::string& path) {
  const io::json j = io::load_json(path);
  io::check_schema(j, path);
  if (!j.contains("bs"))
    throw std::runtime_error(path + ": no 'bs' state found");
  return io::bs_state_from_json(j["bs"]);
}

const FrameTruth& require_truth(const MeasurementFrame& f,
                                const char* stage) {
  if (!f.truth) throw StageError(stage, "frames carry no ground truth");
  return *f.truth;
}

int cmd_simulate(const std::string& config, const std::string& out,
                 std::int64_t seed, bool signal_level, bool write_tensors) {
  RunConfig cfg;
  cfg.scenario = load_scenario(config);
  if (seed >= 0) cfg.scenario.rng_seed = std::uint64_t(seed);
  cfg.signal_level = signal_level;
  cfg.write_tensors = write_tensors;
  cfg.out_dir = out;
  fs::create_directories(out);
  std::vector<MeasurementFrame> frames;
  try {
    frames = simulate_frames(cfg);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("simulate", e.what());
  }
  io::write_json(fs::path(out) / "scenario.json",
                 io::scenario_to_json(cfg.scenario));
  io::write_frames(fs::path(out) / "frames.json", frames);
  std::cout << "simulated " << frames.size() << " frame(s) -> " << out
            << "/frames.json\n";
  return 0;
}

int cmd_estimate_channel(const std::vector<std::string>& tensors,
                         const std::string& config, const std::string& out) {
  const ScenarioConfig scenario = load_scenario(config);
  std::vector<MeasurementFrame> frames;
  try {
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      const RawBeamspace raw = io::load_tensor(tensors[k]);
      const double t = k < scenario.trajectory.size()
                           ? scenario.trajectory[k].timestamp
                           : double(k);
      frames.push_back(estimate_paths(raw, scenario.codebook, {}, t));
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("estimate-channel", e.what());
  }
  fs::create_directories(out);
  io::write_frames(fs::path(out) / "frames_estimated.json", frames);
  std::cout << "estimated " << frames.size() << " frame(s) -> " << out
            << "/frames_estimated.json\n";
  return 0;
}

int cmd_calibrate(const std::string& samples_path, const std::string& prior,
                  const std::string& out, double halfwidth_pos,
                  double halfwidth_ang_deg) {
  try {
    const auto samples = io::load_calibration_samples(samples_path);
    const BSState prior_bs = load_bs_state(prior);
    CalibrationOptions opts;
    opts.prior_halfwidth_pos = Vec3::Constant(halfwidth_pos);
    opts.prior_halfwidth_ang = Vec3::Constant(deg_to_rad(halfwidth_ang_deg));
    const CalibrationResult result = calibrate_bs(samples, prior_bs, opts);
    fs::create_directories(out);
    io::write_calibration_result(fs::path(out) / "calibration.json", result);
    std::cout << "calibrated BS: position ["
              << result.bs_estimate.position.transpose() << "] m, cost "
              << result.final_cost << " -> " << out << "/calibration.json\n";
    return 0;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("calibrate", e.what());
  }
}

int cmd_localize(const std::string& mode_str, const std::string& frames_path,
                 const std::string& bs_path, const std::string& out,
                 double yaw_offset_deg) {
  const PositioningMode mode = positioning_mode_from_string(mode_str);
  const auto frames = io::load_frames(frames_path);
  BSState bs = load_bs_state(bs_path);
  bs.orientation.yaw = wrap_pi(bs.orientation.yaw + deg_to_rad(yaw_offset_deg));

  std::vector<io::TimedFix> fixes;
  try {
    for (const auto& frame : frames) {
      const FrameTruth& truth = require_truth(frame, "localize");
      io::TimedFix tf;
      tf.timestamp = frame.timestamp;
      switch (mode) {
        case PositioningMode::AodHeight:
          tf.fix = locate_aod_height(frame.paths[select_los(frame)], bs,
                                     truth.ue.position.z());
          break;
        case PositioningMode::RttAod:
          tf.fix = locate_rtt_aod(frame.paths[select_los(frame)], bs,
                                  truth.ue.clock_bias);
          break;
        case PositioningMode::RttAodAoa:
          tf.fix = locate_los_ls(frame.paths[select_los(frame)], bs,
                                 truth.ue.orientation, truth.ue.clock_bias);
          break;
        case PositioningMode::MultipathRtt:
          tf.fix = locate_multipath_rtt(frame, bs, truth.ue.orientation,
                                        truth.ue.clock_bias);
          break;
        case PositioningMode::MultipathTdoa:
          tf.fix = locate_multipath_tdoa(frame, bs, truth.ue.orientation);
          break;
      }
      fixes.push_back(tf);
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("localize", e.what());
  }
  fs::create_directories(out);
  io::write_fixes(fs::path(out) / "fixes.json", fixes);
  std::cout << "localized " << fixes.size() << " frame(s), mode " << mode_str
            << " -> " << out << "/fixes.json\n";
  return 0;
}

int cmd_map(const std::string& frames_path, const std::string& fixes_path,
            const std::string& bs_path, const std::string& out) {
  const auto frames = io::load_frames(frames_path);
  const auto fixes = io::load_fixes(fixes_path);
  const BSState bs = load_bs_state(bs_path);
  if (frames.size() != fixes.size())
    throw StageError("map", "frames/fixes length mismatch");

  std::vector<IPEstimate> ips;
  try {
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const MeasurementFrame& frame = frames[k];
      if (frame.timestamp != fixes[k].timestamp)
        throw std::runtime_error("frame/fix timestamp mismatch");
      const FrameTruth& truth = require_truth(frame, "map");
      const PositionFix& fix = fixes[k].fix;
      const double bias =
          fix.clock_bias ? *fix.clock_bias : truth.ue.clock_bias;
      const std::size_t los_index = select_los(frame);
      for (std::size_t i = 0; i < frame.paths.size(); ++i) {
        const bool is_los = truth.paths.empty() ? i == los_index
                                                : truth.paths[i].is_los;
        if (is_los) continue;
        Vec3 init;
        try {
          init = init_ip(frame.paths[i], bs, fix.position,
                         truth.ue.orientation);
        } catch (const std::runtime_error&) {
          continue;
        }
        IPEstimate est = refine_ip(frame.paths[i], bs, fix.position,
                                   truth.ue.orientation, bias, init);
        est.frame_index = int(k);
        est.path_index = int(i);
        ips.push_back(est);
      }
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("map", e.what());
  }
  fs::create_directories(out);
  io::write_ip_estimates(fs::path(out) / "incidence_points.json", ips);
  std::cout << "mapped " << ips.size() << " incidence point(s) -> " << out
            << "/incidence_points.json\n";
  return 0;
}

int cmd_evaluate(const std::string& fixes_path, const std::string& frames_path,
                 const std::string& out) {
  try {
    const auto fixes = io::load_fixes(fixes_path);
    const auto frames = io::load_frames(frames_path);
    std::vector<Vec3> est, truth;
    for (const auto& tf : fixes) {
      const MeasurementFrame* match = nullptr;
      for (const auto& f : frames)
        if (f.timestamp == tf.timestamp) {
          match = &f;
          break;
        }
      if (!match)
        throw std::runtime_error("no frame with timestamp " +
                                 std::to_string(tf.timestamp));
      est.push_back(tf.fix.position);
      truth.push_back(require_truth(*match, "evaluate").ue.position);
    }
    const ErrorReport report = compute_error_cdf(est, truth);
    fs::create_directories(out);
    io::write_report(fs::path(out) / "report.json", report);
    io::write_cdf_csv(fs::path(out) / "cdf.csv", report);
    std::cout << "evaluated " << est.size() << " fix(es): MAE " << report.mae
              << " m, p90 " << report.quantile(0.9) << " m -> " << out
              << "/report.json\n";
    return 0;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("evaluate", e.what());
  }
}

int cmd_pipeline(const std::string& config, const std::string& out,
                 std::int64_t seed) {
  const fs::path config_path(config);
  const io::json j = io::load_json(config_path);
  io::check_schema(j, config);
  RunConfig cfg = run_config_from_json(j, config_path.parent_path());
  if (!out.empty()) cfg.out_dir = out;
  if (seed >= 0) cfg.scenario.rng_seed = std::uint64_t(seed);
  const PipelineResult result = run_pipeline(cfg);
  std::cout << "pipeline done: " << result.fixes.size() << " frame(s), MAE "
            << result.report.mae << " m, p90 " << result.report.quantile(0.9)
            << " m";
  if (!cfg.out_dir.empty()) std::cout << " -> " << cfg.out_dir.string();
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single base-station mmWave positioning and mapping toolkit"};
  app.require_subcommand(1);

  std::string config, out, mode, frames_path, fixes_path, bs_path,
      samples_path, prior_path;
  std::vector<std::string> tensor_paths;
  std::int64_t seed = -1;
  bool signal_level = false, write_tensors = false;
  double yaw_offset_deg = 0.0, halfwidth_pos = 5.0, halfwidth_ang_deg = 10.0;

  auto* sim = app.add_subcommand("simulate", "generate synthetic frames");
  sim->add_option("--config", config, "scenario JSON")->required();
  sim->add_option("--out", out, "output directory")->required();
  sim->add_option("--seed", seed, "RNG seed override");
  sim->add_flag("--signal-level", signal_level,
                "synthesize beamspace tensors and run the channel estimator");
  sim->add_flag("--write-tensors", write_tensors,
                "persist per-frame tensor files (signal level only)");

  auto* est = app.add_subcommand("estimate-channel",
                                 "estimate paths from tensor files");
  est->add_option("--tensor", tensor_paths, "tensor sidecar JSON file(s)")
      ->required();
  est->add_option("--config", config, "scenario JSON (codebook source)")
      ->required();
  est->add_option("--out", out, "output directory")->required();

  auto* cal = app.add_subcommand("calibrate", "estimate the BS pose");
  cal->add_option("--samples", samples_path, "calibration samples JSON")
      ->required();
  cal->add_option("--prior", prior_path,
                  "JSON with the prior 'bs' state (scenario or calibration)")
      ->required();
  cal->add_option("--out", out, "output directory")->required();
  cal->add_option("--halfwidth-pos", halfwidth_pos,
                  "prior box half-width per position axis, m");
  cal->add_option("--halfwidth-ang-deg", halfwidth_ang_deg,
                  "prior box half-width per angle, deg");

  auto* loc = app.add_subcommand("localize", "solve per-frame UE positions");
  loc->add_option("--mode", mode,
                  "aod-height | rtt-aod | rtt-aod-aoa | multipath-rtt | "
                  "multipath-tdoa")
      ->required();
  loc->add_option("--frames", frames_path, "measurement frames JSON")
      ->required();
  loc->add_option("--bs", bs_path, "JSON carrying the solver 'bs' state")
      ->required();
  loc->add_option("--out", out, "output directory")->required();
  loc->add_option("--yaw-offset-deg", yaw_offset_deg,
                  "extra yaw applied to the solver BS");

  auto* mp = app.add_subcommand("map", "estimate NLOS incidence points");
  mp->add_option("--frames", frames_path, "measurement frames JSON")
      ->required();
  mp->add_option("--fixes", fixes_path, "position fixes JSON")->required();
  mp->add_option("--bs", bs_path, "JSON carrying the solver 'bs' state")
      ->required();
  mp->add_option("--out", out, "output directory")->required();

  auto* ev = app.add_subcommand("evaluate", "x-y error CDF and MAE");
  ev->add_option("--fixes", fixes_path, "position fixes JSON")->required();
  ev->add_option("--frames", frames_path, "frames JSON with ground truth")
      ->required();
  ev->add_option("--out", out, "output directory")->required();

  auto* pipe = app.add_subcommand("pipeline", "run all stages");
  pipe->add_option("--config", config, "run config JSON")->required();
  pipe->add_option("--out", out, "output directory override");
  pipe->add_option("--seed", seed, "RNG seed override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return cmd_simulate(config, out, seed, signal_level, write_tensors);
    if (est->parsed()) return cmd_estimate_channel(tensor_paths, config, out);
    if (cal->parsed())
      return cmd_calibrate(samples_path, prior_path, out, halfwidth_pos,
                           halfwidth_ang_deg);
    if (loc->parsed())
      return cmd_localize(mode, frames_path, bs_path, out, yaw_offset_deg);
    if (mp->parsed()) return cmd_map(frames_path, fixes_path, bs_path, out);
    if (ev->parsed()) return cmd_evaluate(fixes_path, frames_path, out);
    if (pipe->parsed()) return cmd_pipeline(config, out, seed);
  } catch (const StageError& e) {
    std::cerr << "error " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error [cli] " << e.what() << "\n";
    return 1;
  }
  return 0;
}
