// Exercises the CLI surface end to end by spawning the binary.

#include <catch2/catch_amalgamated.hpp>

#include <mmpos/io.hpp>
#include <mmpos/scenario.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>

using namespace mmpos;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "mmpos_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(MMPOS_CLI_PATH) + " " + args +
                          " >" + (kWork / "stdout.txt").string() + " 2>" +
                          (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string stderr_text() { return io::read_text(kWork / "stderr.txt"); }

ScenarioConfig cli_scenario(bool with_walls) {
  ScenarioConfig cfg;
  cfg.bs.position = {0, 0, 20};
  cfg.bs.orientation = {0, deg_to_rad(-10), 0};
  for (int k = 0; k < 6; ++k) {
    TrajectoryPoint p;
    p.timestamp = 3.0 * k;
    p.ue.position = {95.0 + k, -5.0 + k, 1.4};
    p.ue.orientation = {0, 0, kPi};
    cfg.trajectory.push_back(p);
  }
  if (with_walls) {
    Surface left;
    left.anchor = {60, 40, 10};
    left.normal = {0, -1, 0};
    left.extent_u = 120;
    left.extent_v = 40;
    cfg.surfaces.push_back(left);
  }
  cfg.rng_seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("cli runs simulate, localize, evaluate, map and pipeline") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  io::write_json(kWork / "scenario.json",
                 io::scenario_to_json(cli_scenario(true)));

  REQUIRE(run("simulate --config " + (kWork / "scenario.json").string() +
              " --out " + (kWork / "sim").string()) == 0);
  REQUIRE(fs::exists(kWork / "sim" / "frames.json"));

  REQUIRE(run("localize --mode rtt-aod --frames " +
              (kWork / "sim" / "frames.json").string() + " --bs " +
              (kWork / "sim" / "scenario.json").string() + " --out " +
              (kWork / "loc").string()) == 0);
  REQUIRE(fs::exists(kWork / "loc" / "fixes.json"));

  REQUIRE(run("map --frames " + (kWork / "sim" / "frames.json").string() +
              " --fixes " + (kWork / "loc" / "fixes.json").string() +
              " --bs " + (kWork / "sim" / "scenario.json").string() +
              " --out " + (kWork / "map").string()) == 0);
  REQUIRE(fs::exists(kWork / "map" / "incidence_points.json"));
  CHECK(io::load_ip_estimates(kWork / "map" / "incidence_points.json").size() >
        0);

  REQUIRE(run("evaluate --fixes " + (kWork / "loc" / "fixes.json").string() +
              " --frames " + (kWork / "sim" / "frames.json").string() +
              " --out " + (kWork / "eval").string()) == 0);
  const io::json report = io::load_json(kWork / "eval" / "report.json");
  CHECK(report.at("mae_m").get<double>() < 1e-6);

  io::json run_cfg = {{"schema_version", 1},
                      {"scenario_file", "scenario.json"},
                      {"mode", "multipath-rtt"},
                      {"map", true}};
  io::atomic_write_text(kWork / "run.json", run_cfg.dump(2));
  REQUIRE(run("pipeline --config " + (kWork / "run.json").string() +
              " --out " + (kWork / "pipe").string()) == 0);
  CHECK(fs::exists(kWork / "pipe" / "report.json"));
  CHECK(fs::exists(kWork / "pipe" / "incidence_points.json"));
}

TEST_CASE("cli calibrate consumes a samples file") {
  fs::create_directories(kWork);
  const ScenarioConfig sc = cli_scenario(false);
  BSState truth = sc.bs;

  std::vector<CalibrationSample> samples;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 12; ++k) {
    CalibrationSample s;
    s.ue.position = {90 + 20 * u(rng), 30 * u(rng), 1.5};
    s.ue.orientation = {0, 0, kPi + 0.2 * u(rng)};
    s.los_angles = los_angles_of(truth, s.ue);
    s.covariance = 1e-6 * Mat4::Identity();
    samples.push_back(s);
  }
  io::write_calibration_samples(kWork / "samples.json", samples);

  BSState prior = truth;
  prior.position += Vec3(1, -1, 1.5);
  prior.orientation.yaw += deg_to_rad(3);
  io::write_json(kWork / "prior.json",
                 io::json{{"bs", io::bs_state_to_json(prior)}});

  REQUIRE(run("calibrate --samples " + (kWork / "samples.json").string() +
              " --prior " + (kWork / "prior.json").string() + " --out " +
              (kWork / "cal").string()) == 0);
  const CalibrationResult r =
      io::load_calibration_result(kWork / "cal" / "calibration.json");
  CHECK(r.converged);
  CHECK((r.bs_estimate.position - truth.position).norm() < 0.01);
}

TEST_CASE("cli estimate-channel consumes tensor files") {
  fs::create_directories(kWork);
  ScenarioConfig sc = cli_scenario(false);
  sc.trajectory.resize(1);
  io::write_json(kWork / "scenario1.json", io::scenario_to_json(sc));

  REQUIRE(run("simulate --config " + (kWork / "scenario1.json").string() +
              " --out " + (kWork / "sig").string() +
              " --signal-level --write-tensors") == 0);
  REQUIRE(fs::exists(kWork / "sig" / "tensor_0000.json"));

  REQUIRE(run("estimate-channel --tensor " +
              (kWork / "sig" / "tensor_0000.json").string() + " --config " +
              (kWork / "scenario1.json").string() + " --out " +
              (kWork / "est").string()) == 0);
  const auto frames = io::load_frames(kWork / "est" / "frames_estimated.json");
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].paths.size() >= 1);
}

TEST_CASE("cli failures exit nonzero with a stage tag") {
  fs::create_directories(kWork);
  io::write_json(kWork / "scenario_los.json",
                 io::scenario_to_json(cli_scenario(false)));
  REQUIRE(run("simulate --config " + (kWork / "scenario_los.json").string() +
              " --out " + (kWork / "sim_los").string()) == 0);
  const int rc = run("localize --mode multipath-tdoa --frames " +
                     (kWork / "sim_los" / "frames.json").string() + " --bs " +
                     (kWork / "sim_los" / "scenario.json").string() +
                     " --out " + (kWork / "loc_fail").string());
  CHECK(rc != 0);
  CHECK(stderr_text().find("[localize]") != std::string::npos);
}
