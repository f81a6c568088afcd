#include <catch2/catch_amalgamated.hpp>

#include <mmpos/positioning.hpp>
#include <mmpos/scenario.hpp>

#include "support/oracles.hpp"
#include "support/scenes.hpp"

#include <random>

using namespace mmpos;
using mmpos::testing::make_random_scene;
using mmpos::testing::oracle_line;

namespace {

PathMeasurement exact_measurement(const SimPath& p) {
  PathMeasurement m;
  m.z = p.true_measurement;
  m.strength = p.strength;
  return m;
}

MeasurementFrame exact_frame(const std::vector<SimPath>& paths) {
  MeasurementFrame f;
  for (const auto& p : paths) f.paths.push_back(exact_measurement(p));
  return f;
}

}  // namespace

TEST_CASE("rtt-aod straight down and boresight cases") {
  BSState bs;
  bs.position = {0, 0, 30};
  PathMeasurement down;
  down.z.toa = 30.0 / kSpeedOfLight;
  down.z.aod_az = 0.0;
  down.z.aod_el = -kPi / 2;
  CHECK((locate_rtt_aod(down, bs).position - Vec3(0, 0, 0)).norm() < 1e-9);

  BSState origin;
  PathMeasurement fwd;
  fwd.z.toa = 50.0 / kSpeedOfLight;
  CHECK((locate_rtt_aod(fwd, origin).position - Vec3(50, 0, 0)).norm() <
        1e-9);
}

TEST_CASE("rtt-aod rejects nonpositive range") {
  BSState bs;
  PathMeasurement m;
  m.z.toa = 10e-9;
  CHECK_THROWS_AS(locate_rtt_aod(m, bs, 20e-9), std::runtime_error);
}

TEST_CASE("rtt-aod inverts the forward model on random geometry") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 100; ++t) {
    BSState bs;
    bs.position = {10 * u(rng), 10 * u(rng), 18 + 4 * u(rng)};
    bs.orientation = {0.2 * u(rng), 0.2 * u(rng), kPi * u(rng)};
    UEState ue;
    ue.position = {100 * u(rng), 100 * u(rng), 1.5 + u(rng)};
    if ((ue.position - bs.position).norm() < 5) continue;
    const MeasurementVector z = measurement_function(ue, bs);
    PathMeasurement m;
    m.z = z;
    CHECK((locate_rtt_aod(m, bs).position - ue.position).norm() < 1e-9);
  }
}

TEST_CASE("aod-height textbook cases") {
  BSState bs;
  bs.position = {0, 0, 21};
  PathMeasurement m;
  m.z.aod_az = 0.0;
  m.z.aod_el = deg_to_rad(-45);
  const PositionFix fix = locate_aod_height(m, bs, 1.0);
  CHECK(fix.position.x() == Catch::Approx(20.0).margin(1e-9));
  CHECK(fix.position.y() == Catch::Approx(0.0).margin(1e-12));
  CHECK(fix.position.z() == 1.0);

  PathMeasurement down;
  down.z.aod_el = -kPi / 2;
  const PositionFix below = locate_aod_height(down, bs, 0.0);
  CHECK(below.position.head<2>().norm() < 1e-9);
}

TEST_CASE("aod-height rejects grazing rays") {
  BSState bs;
  bs.position = {0, 0, 21};
  PathMeasurement m;  // aod_el = 0: horizontal departure
  CHECK_THROWS_AS(locate_aod_height(m, bs, 1.0), std::runtime_error);
}

TEST_CASE("aod-height inverts the forward model for ground targets") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 100; ++t) {
    BSState bs;
    bs.position = {5 * u(rng), 5 * u(rng), 20 + 3 * u(rng)};
    bs.orientation = {0.1 * u(rng), 0.2 * u(rng), kPi * u(rng)};
    UEState ue;
    ue.position = {80 + 40 * u(rng), 60 * u(rng), 0.0};
    const MeasurementVector z = measurement_function(ue, bs);
    PathMeasurement m;
    m.z = z;
    const PositionFix fix = locate_aod_height(m, bs, 0.0);
    CHECK((fix.position - ue.position).norm() < 1e-9);
  }
}

TEST_CASE("los least-squares solver matches truth on noiseless input") {
  std::mt19937_64 rng(23);
  auto scene = make_random_scene(rng, 0);
  PathMeasurement m = exact_measurement(scene.paths[0]);
  m.covariance.diagonal() << 1e-17, 1e-4, 1e4, 1e-4, 1e-4;
  const PositionFix fix =
      locate_los_ls(m, scene.bs, scene.ue.orientation, 0.0);
  CHECK((fix.position - scene.ue.position).norm() < 1e-6);
  CHECK(fix.residual_cost < 1e-12);
}

TEST_CASE("los least-squares agrees with a dense grid oracle") {
  std::mt19937_64 rng(24);
  auto scene = make_random_scene(rng, 0);
  NoiseModel noise;
  noise.toa_std = 1.0 / kSpeedOfLight;  // 1 m ranging error
  noise.aoa_az_std = deg_to_rad(1.0);
  noise.aod_az_std = deg_to_rad(1.0);
  noise.aod_el_std = deg_to_rad(1.0);
  auto frame_rng = make_frame_rng(3, 0);
  auto frame = synthesize_measurements(scene.paths, scene.ue, noise,
                                       ClockBiasModel{}, frame_rng);
  PathMeasurement m = frame.paths[0];
  m.covariance(2, 2) = 1e4;  // uninformative AOA elevation

  const PositionFix fix =
      locate_los_ls(m, scene.bs, scene.ue.orientation, 0.0);

  const Eigen::LLT<Mat5> llt(m.covariance);
  const Mat5 w = llt.matrixL().solve(Mat5::Identity());
  auto cost_at = [&](const Vec3& p) {
    UEState ue;
    ue.position = p;
    ue.orientation = scene.ue.orientation;
    const MeasurementVector h = measurement_function(ue, scene.bs);
    Eigen::Matrix<double, 5, 1> d = h.vec() - m.z.vec();
    d[1] = wrap_pi(d[1]);
    d[3] = wrap_pi(d[3]);
    return (w * d).squaredNorm();
  };

  // 0.01 m lattice around the solver answer; argmin must be interior and
  // no lattice point may beat the solver by more than a lattice-step.
  const double step = 0.01;
  const int n = 25;
  Vec3 best = fix.position;
  double best_cost = cost_at(best);
  bool interior = true;
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      for (int k = -n; k <= n; ++k) {
        const Vec3 p = fix.position + Vec3(i, j, k) * step;
        const double c = cost_at(p);
        if (c < best_cost) {
          best_cost = c;
          best = p;
          interior =
              std::abs(i) < n && std::abs(j) < n && std::abs(k) < n;
        }
      }
  CHECK(interior);
  CHECK((best - fix.position).norm() <= std::sqrt(3.0) * step + 1e-12);
}

TEST_CASE("build_path_line collapses LOS paths to the UE position") {
  std::mt19937_64 rng(25);
  auto scene = make_random_scene(rng, 0);
  const PathLine line = build_path_line(exact_measurement(scene.paths[0]),
                                        scene.bs, scene.ue.orientation, 0.0);
  CHECK(line.degenerate);
  CHECK((line.mu - scene.ue.position).norm() < 1e-9);
}

TEST_CASE("build_path_line puts the UE on the NLOS line") {
  std::mt19937_64 rng(26);
  auto scene = make_random_scene(rng, 2);
  for (std::size_t i = 1; i < scene.paths.size(); ++i) {
    const PathLine line = build_path_line(exact_measurement(scene.paths[i]),
                                          scene.bs, scene.ue.orientation,
                                          0.0);
    REQUIRE_FALSE(line.degenerate);
    const Vec3 nbar = line.nu.normalized();
    const Vec3 d = scene.ue.position - line.mu;
    CHECK((d - nbar.dot(d) * nbar).norm() < 1e-9);
  }
}

TEST_CASE("build_path_line bias shift moves mu along the arrival direction") {
  std::mt19937_64 rng(27);
  auto scene = make_random_scene(rng, 1);
  const PathMeasurement m = exact_measurement(scene.paths[1]);
  const PathLine a = build_path_line(m, scene.bs, scene.ue.orientation, 0.0);
  const double db = 70e-9;
  const PathLine b = build_path_line(m, scene.bs, scene.ue.orientation, db);
  const Vec3 u_ue =
      aoa_unit_global(scene.ue.orientation, m.z.aoa_az, m.z.aoa_el);
  CHECK((b.mu - (a.mu + db * kSpeedOfLight * u_ue)).norm() < 1e-9);
  CHECK((b.nu - a.nu).norm() == 0.0);
}

TEST_CASE("multipath-rtt recovers truth from LOS plus two reflections") {
  std::mt19937_64 rng(28);
  for (int t = 0; t < 10; ++t) {
    auto scene = make_random_scene(rng, 2);
    const MeasurementFrame frame = exact_frame(scene.paths);
    const PositionFix fix =
        locate_multipath_rtt(frame, scene.bs, scene.ue.orientation, 0.0);
    CHECK((fix.position - scene.ue.position).norm() < 1e-6);
    CHECK(fix.n_paths_used == int(scene.paths.size()));
  }
}

TEST_CASE("multipath-rtt with a single LOS path returns the point solution") {
  std::mt19937_64 rng(29);
  auto scene = make_random_scene(rng, 0);
  MeasurementFrame frame;
  frame.paths.push_back(exact_measurement(scene.paths[0]));
  const PositionFix fix =
      locate_multipath_rtt(frame, scene.bs, scene.ue.orientation, 0.0);
  const PositionFix direct = locate_rtt_aod(frame.paths[0], scene.bs, 0.0);
  CHECK((fix.position - direct.position).norm() < 1e-9);
}

TEST_CASE("multipath-rtt matches the dense-lattice oracle") {
  std::mt19937_64 rng(30);
  for (int t = 0; t < 3; ++t) {
    auto scene = make_random_scene(rng, 2);
    NoiseModel noise;
    noise.toa_std = 0.5 / kSpeedOfLight;
    noise.aoa_az_std = deg_to_rad(0.3);
    noise.aod_az_std = deg_to_rad(0.3);
    noise.aod_el_std = deg_to_rad(0.3);
    auto frame_rng = make_frame_rng(4, t);
    auto frame = synthesize_measurements(scene.paths, scene.ue, noise,
                                         ClockBiasModel{}, frame_rng);
    const PositionFix fix =
        locate_multipath_rtt(frame, scene.bs, scene.ue.orientation, 0.0);

    std::vector<mmpos::testing::OracleLine> lines;
    for (const auto& p : frame.paths)
      lines.push_back(oracle_line(p, scene.bs, scene.ue.orientation, 0.0));
    const auto lattice =
        mmpos::testing::lattice_minimize_rtt(lines, fix.position, 0.15, 0.01);
    CHECK(lattice.interior);
    CHECK((lattice.argmin - fix.position).norm() <=
          std::sqrt(3.0) * 0.01 + 1e-12);
  }
}

TEST_CASE("multipath-tdoa recovers position and bias") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 10; ++t) {
    auto scene = make_random_scene(rng, 2, 100e-9);  // true bias 100 ns
    const MeasurementFrame frame = exact_frame(scene.paths);
    const PositionFix fix =
        locate_multipath_tdoa(frame, scene.bs, scene.ue.orientation);
    REQUIRE(fix.clock_bias.has_value());
    CHECK((fix.position - scene.ue.position).norm() < 1e-6);
    CHECK(std::abs(*fix.clock_bias - 100e-9) < 1e-12);
  }
}

TEST_CASE("adding a constant bias shifts the bias estimate only") {
  std::mt19937_64 rng(32);
  auto scene = make_random_scene(rng, 2);
  NoiseModel noise;
  noise.toa_std = 1e-9;
  noise.aoa_az_std = deg_to_rad(0.5);
  noise.aod_az_std = deg_to_rad(0.5);
  auto frame_rng = make_frame_rng(5, 0);
  auto frame = synthesize_measurements(scene.paths, scene.ue, noise,
                                       ClockBiasModel{}, frame_rng);
  const PositionFix base =
      locate_multipath_tdoa(frame, scene.bs, scene.ue.orientation);

  const double db = 250e-9;
  MeasurementFrame shifted = frame;
  for (auto& p : shifted.paths) p.z.toa += db;
  const PositionFix moved =
      locate_multipath_tdoa(shifted, scene.bs, scene.ue.orientation);
  CHECK((moved.position - base.position).norm() < 1e-8);
  CHECK(std::abs(*moved.clock_bias - *base.clock_bias - db) < 1e-15);
}

TEST_CASE("multipath-tdoa matches the 4D lattice oracle") {
  std::mt19937_64 rng(33);
  auto scene = make_random_scene(rng, 2, 40e-9);
  NoiseModel noise;
  noise.toa_std = 0.3 / kSpeedOfLight;
  noise.aoa_az_std = deg_to_rad(0.2);
  noise.aod_az_std = deg_to_rad(0.2);
  auto frame_rng = make_frame_rng(6, 0);
  auto frame = synthesize_measurements(scene.paths, scene.ue, noise,
                                       ClockBiasModel{}, frame_rng);
  const PositionFix fix =
      locate_multipath_tdoa(frame, scene.bs, scene.ue.orientation);

  std::vector<mmpos::testing::OracleLine> lines;
  for (const auto& p : frame.paths)
    lines.push_back(oracle_line(p, scene.bs, scene.ue.orientation, 0.0));
  const auto lattice = mmpos::testing::lattice_minimize_tdoa(
      lines, fix.position, *fix.clock_bias * kSpeedOfLight, 0.12, 0.01);
  CHECK(lattice.interior);
  CHECK((lattice.argmin - fix.position).norm() <=
        std::sqrt(4.0) * 0.01 + 1e-12);
  CHECK(std::abs(lattice.beta - *fix.clock_bias * kSpeedOfLight) <=
        2.0 * 0.01 + 1e-12);
}

TEST_CASE("tdoa is unobservable with near-parallel arrival directions") {
  // LOS plus one NLOS built so both arrival directions coincide: the
  // position/bias pair cannot be separated.
  BSState bs;
  bs.position = {0, 0, 20};
  UEState ue;
  ue.position = {100, 0, 1};
  MeasurementFrame frame;

  PathMeasurement los;
  los.z = measurement_function(ue, bs);
  los.strength = 1.0;
  frame.paths.push_back(los);

  PathMeasurement ghost = los;  // same angles, longer delay
  ghost.z.toa += 150e-9;
  ghost.strength = 0.3;
  frame.paths.push_back(ghost);

  CHECK_THROWS_AS(locate_multipath_tdoa(frame, bs, ue.orientation),
                  std::runtime_error);
}

TEST_CASE("single-path tdoa is rejected") {
  std::mt19937_64 rng(34);
  auto scene = make_random_scene(rng, 0);
  MeasurementFrame frame;
  frame.paths.push_back(exact_measurement(scene.paths[0]));
  CHECK_THROWS_AS(
      locate_multipath_tdoa(frame, scene.bs, scene.ue.orientation),
      std::runtime_error);
}

TEST_CASE("common weight scaling leaves the solutions unchanged") {
  std::mt19937_64 rng(35);
  auto scene = make_random_scene(rng, 2, 30e-9);
  NoiseModel noise;
  noise.toa_std = 1e-9;
  noise.aod_az_std = deg_to_rad(0.5);
  auto frame_rng = make_frame_rng(7, 0);
  auto frame = synthesize_measurements(scene.paths, scene.ue, noise,
                                       ClockBiasModel{}, frame_rng);

  const PositionFix rtt_a =
      locate_multipath_rtt(frame, scene.bs, scene.ue.orientation, 30e-9);
  const PositionFix tdoa_a =
      locate_multipath_tdoa(frame, scene.bs, scene.ue.orientation);

  MeasurementFrame scaled = frame;
  for (auto& p : scaled.paths) p.strength *= 137.0;
  const PositionFix rtt_b =
      locate_multipath_rtt(scaled, scene.bs, scene.ue.orientation, 30e-9);
  const PositionFix tdoa_b =
      locate_multipath_tdoa(scaled, scene.bs, scene.ue.orientation);

  CHECK((rtt_a.position - rtt_b.position).norm() < 1e-10);
  CHECK((tdoa_a.position - tdoa_b.position).norm() < 1e-10);
  CHECK(std::abs(*tdoa_a.clock_bias - *tdoa_b.clock_bias) < 1e-18);
}

TEST_CASE("doubling the noise does not shrink the median error") {
  std::mt19937_64 scene_rng(36);
  auto scene = make_random_scene(scene_rng, 0);

  auto median_error = [&](double scale, std::uint64_t seed) {
    NoiseModel noise;
    noise.toa_std = scale * 1.0 / kSpeedOfLight;
    noise.aoa_az_std = scale * deg_to_rad(1.0);
    noise.aod_az_std = scale * deg_to_rad(1.0);
    noise.aod_el_std = scale * deg_to_rad(1.0);
    std::vector<double> errs;
    for (int i = 0; i < 500; ++i) {
      auto rng = make_frame_rng(seed, i);
      auto frame = synthesize_measurements(scene.paths, scene.ue, noise,
                                           ClockBiasModel{}, rng);
      const PositionFix fix = locate_rtt_aod(frame.paths[0], scene.bs, 0.0);
      errs.push_back((fix.position - scene.ue.position).head<2>().norm());
    }
    std::sort(errs.begin(), errs.end());
    return errs[errs.size() / 2];
  };

  CHECK(median_error(2.0, 11) >= median_error(1.0, 11));
}
