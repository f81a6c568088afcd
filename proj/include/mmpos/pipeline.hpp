// End-to-end orchestration: simulate -> (optional signal-level synthesis +
// channel estimation) -> optional BS calibration -> per-frame localization
// -> optional incidence-point mapping -> error evaluation. Every stage
// persists its artifacts; failures surface as stage-tagged errors.

#pragma once

#include <mmpos/calibration.hpp>
#include <mmpos/channel_estimator.hpp>
#include <mmpos/evaluation.hpp>
#include <mmpos/io.hpp>
#include <mmpos/mapping.hpp>
#include <mmpos/measurement.hpp>
#include <mmpos/positioning.hpp>
#include <mmpos/scenario.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmpos {

struct StageError : std::runtime_error {
  std::string stage;
  StageError(const std::string& stage_name, const std::string& message)
      : std::runtime_error("[" + stage_name + "] " + message),
        stage(stage_name) {}
};

struct RunConfig {
  ScenarioConfig scenario;
  PositioningMode mode = PositioningMode::RttAod;
  bool signal_level = false;
  bool do_calibration = false;
  int n_calibration_frames = 20;
  std::optional<BSState> calibration_prior;  // defaults to the true BS state
  bool do_mapping = false;
  double bs_yaw_offset_deg = 0.0;            // A/B perturbation of the solver BS
  bool write_tensors = false;
  ChannelEstimatorConfig estimator;
  std::filesystem::path out_dir;
};

struct PipelineResult {
  std::vector<MeasurementFrame> frames;
  std::optional<CalibrationResult> calibration;
  std::vector<io::TimedFix> fixes;
  std::vector<IPEstimate> incidence_points;
  ErrorReport report;
};

namespace detail {

inline const FrameTruth& require_truth(const MeasurementFrame& f,
                                       const std::string& stage) {
  if (!f.truth) throw StageError(stage, "frame carries no ground truth");
  return *f.truth;
}

}  // namespace detail

inline std::vector<MeasurementFrame> simulate_frames(const RunConfig& cfg) {
  const ScenarioConfig& sc = cfg.scenario;
  sc.validate();
  std::vector<MeasurementFrame> frames;
  for (std::size_t k = 0; k < sc.trajectory.size(); ++k) {
    const TrajectoryPoint& tp = sc.trajectory[k];
    auto rng = make_frame_rng(sc.rng_seed, k);
    if (!cfg.signal_level) {
      const auto paths = generate_paths(sc.bs, tp.ue, sc.surfaces,
                                        sc.signal.carrier_hz);
      frames.push_back(synthesize_measurements(paths, tp.ue,
                                               sc.measurement_noise,
                                               sc.clock_bias, rng,
                                               tp.timestamp));
    } else {
      UEState ue = tp.ue;
      ue.clock_bias += sc.clock_bias.sample(rng);
      const auto paths =
          generate_paths(sc.bs, ue, sc.surfaces, sc.signal.carrier_hz);
      const RawBeamspace raw =
          synthesize_beamspace(paths, sc.codebook, sc.signal, rng);
      if (cfg.write_tensors && !cfg.out_dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof name, "tensor_%04zu.json", k);
        io::write_tensor(cfg.out_dir / name, raw);
      }
      MeasurementFrame frame =
          estimate_paths(raw, sc.codebook, cfg.estimator, tp.timestamp);
      frame.truth.emplace();
      frame.truth->ue = ue;
      frames.push_back(std::move(frame));
    }
  }
  return frames;
}

inline PipelineResult run_pipeline(const RunConfig& cfg) {
  PipelineResult out;

  if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);

  try {
    out.frames = simulate_frames(cfg);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(cfg.signal_level ? "estimate-channel" : "simulate",
                     e.what());
  }

  BSState solver_bs = cfg.scenario.bs;
  if (cfg.do_calibration) {
    try {
      std::vector<CalibrationSample> samples;
      const std::size_t n_cal =
          std::min<std::size_t>(std::max(cfg.n_calibration_frames, 0),
                                out.frames.size());
      for (std::size_t k = 0; k < n_cal; ++k) {
        const FrameTruth& truth =
            detail::require_truth(out.frames[k], "calibrate");
        samples.push_back(sample_from_frame(out.frames[k], truth.ue));
      }
      const BSState prior = cfg.calibration_prior.value_or(cfg.scenario.bs);
      out.calibration = calibrate_bs(samples, prior);
      solver_bs = out.calibration->bs_estimate;
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError("calibrate", e.what());
    }
  }
  solver_bs.orientation.yaw =
      wrap_pi(solver_bs.orientation.yaw + deg_to_rad(cfg.bs_yaw_offset_deg));

  try {
    for (std::size_t k = 0; k < out.frames.size(); ++k) {
      const MeasurementFrame& frame = out.frames[k];
      const FrameTruth& truth = detail::require_truth(frame, "localize");
      io::TimedFix tf;
      tf.timestamp = frame.timestamp;
      switch (cfg.mode) {
        case PositioningMode::AodHeight:
          tf.fix = locate_aod_height(frame.paths[select_los(frame)],
                                     solver_bs, truth.ue.position.z());
          break;
        case PositioningMode::RttAod:
          tf.fix = locate_rtt_aod(frame.paths[select_los(frame)], solver_bs,
                                  truth.ue.clock_bias);
          break;
        case PositioningMode::RttAodAoa:
          tf.fix = locate_los_ls(frame.paths[select_los(frame)], solver_bs,
                                 truth.ue.orientation, truth.ue.clock_bias);
          break;
        case PositioningMode::MultipathRtt:
          tf.fix = locate_multipath_rtt(frame, solver_bs,
                                        truth.ue.orientation,
                                        truth.ue.clock_bias);
          break;
        case PositioningMode::MultipathTdoa:
          tf.fix =
              locate_multipath_tdoa(frame, solver_bs, truth.ue.orientation);
          break;
      }
      out.fixes.push_back(tf);
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("localize", e.what());
  }

  if (cfg.do_mapping) {
    try {
      for (std::size_t k = 0; k < out.frames.size(); ++k) {
        const MeasurementFrame& frame = out.frames[k];
        const FrameTruth& truth = detail::require_truth(frame, "map");
        const PositionFix& fix = out.fixes[k].fix;
        const double bias =
            fix.clock_bias ? *fix.clock_bias : truth.ue.clock_bias;
        const std::size_t los_index = select_los(frame);
        for (std::size_t i = 0; i < frame.paths.size(); ++i) {
          const bool is_los = truth.paths.empty()
                                  ? i == los_index
                                  : truth.paths[i].is_los;
          if (is_los) continue;
          Vec3 init;
          try {
            init = init_ip(frame.paths[i], solver_bs, fix.position,
                           truth.ue.orientation);
          } catch (const std::runtime_error&) {
            continue;  // near-parallel rays: nothing to map for this path
          }
          IPEstimate est =
              refine_ip(frame.paths[i], solver_bs, fix.position,
                        truth.ue.orientation, bias, init);
          est.frame_index = int(k);
          est.path_index = int(i);
          out.incidence_points.push_back(est);
        }
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError("map", e.what());
    }
  }

  try {
    std::vector<Vec3> est, truth;
    for (std::size_t k = 0; k < out.frames.size(); ++k) {
      est.push_back(out.fixes[k].fix.position);
      truth.push_back(
          detail::require_truth(out.frames[k], "evaluate").ue.position);
    }
    out.report = compute_error_cdf(est, truth);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("evaluate", e.what());
  }

  if (!cfg.out_dir.empty()) {
    try {
      io::write_json(cfg.out_dir / "scenario.json",
                     io::scenario_to_json(cfg.scenario));
      io::write_frames(cfg.out_dir / "frames.json", out.frames);
      if (out.calibration)
        io::write_calibration_result(cfg.out_dir / "calibration.json",
                                     *out.calibration);
      io::write_fixes(cfg.out_dir / "fixes.json", out.fixes);
      if (cfg.do_mapping)
        io::write_ip_estimates(cfg.out_dir / "incidence_points.json",
                               out.incidence_points);
      io::write_report(cfg.out_dir / "report.json", out.report);
      io::write_cdf_csv(cfg.out_dir / "cdf.csv", out.report);
    } catch (const std::exception& e) {
      throw StageError("write", e.what());
    }
  }
  return out;
}

// ---- run-config JSON ---------------------------------------------------------

inline ChannelEstimatorConfig estimator_from_json(const io::json& j) {
  ChannelEstimatorConfig c;
  c.max_paths = j.value("max_paths", c.max_paths);
  c.min_rel_power_db = j.value("min_rel_power_db", c.min_rel_power_db);
  c.delay_grid_points = j.value("delay_grid_points", c.delay_grid_points);
  c.toa_std = j.value("toa_std_s", c.toa_std);
  if (j.contains("aoa_az_std_deg"))
    c.aoa_az_std = deg_to_rad(j["aoa_az_std_deg"].get<double>());
  if (j.contains("aod_az_std_deg"))
    c.aod_az_std = deg_to_rad(j["aod_az_std_deg"].get<double>());
  if (j.contains("aod_el_std_deg"))
    c.aod_el_std = deg_to_rad(j["aod_el_std_deg"].get<double>());
  c.aoa_el_variance = j.value("aoa_el_variance", c.aoa_el_variance);
  return c;
}

/// Parses a pipeline run config. `scenario` may be inline or referenced
/// through `scenario_file` (relative to base_dir).
inline RunConfig run_config_from_json(const io::json& j,
                                      const std::filesystem::path& base_dir) {
  RunConfig cfg;
  if (j.contains("scenario")) {
    cfg.scenario = io::scenario_from_json(j["scenario"]);
  } else if (j.contains("scenario_file")) {
    const std::filesystem::path p = j["scenario_file"].get<std::string>();
    const auto resolved = p.is_absolute() ? p : base_dir / p;
    const io::json sj = io::load_json(resolved);
    io::check_schema(sj, resolved.string());
    cfg.scenario = io::scenario_from_json(sj);
  } else {
    throw std::runtime_error("run config needs 'scenario' or 'scenario_file'");
  }
  cfg.mode =
      positioning_mode_from_string(j.value("mode", std::string("rtt-aod")));
  cfg.signal_level = j.value("signal_level", false);
  cfg.do_calibration = j.value("calibrate", false);
  cfg.n_calibration_frames =
      j.value("n_calibration_frames", cfg.n_calibration_frames);
  cfg.do_mapping = j.value("map", false);
  cfg.bs_yaw_offset_deg = j.value("bs_yaw_offset_deg", 0.0);
  cfg.write_tensors = j.value("write_tensors", false);
  if (j.contains("calibration_prior"))
    cfg.calibration_prior = io::bs_state_from_json(j["calibration_prior"]);
  if (j.contains("estimator"))
    cfg.estimator = estimator_from_json(j["estimator"]);
  return cfg;
}

}  // namespace mmpos
