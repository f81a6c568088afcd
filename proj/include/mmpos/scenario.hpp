// Synthetic scenario generation at two fidelities: path-level ground truth
// (image-source reflections off planar surfaces, Gaussian measurement
// noise, per-frame clock bias) and signal-level beam-swept OFDM symbols.

#pragma once

#include <mmpos/beamspace.hpp>
#include <mmpos/geometry.hpp>
#include <mmpos/measurement.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmpos {

/// Planar reflector: a point on the plane, the unit normal, and half-widths
/// along two derived in-plane axes.
struct Surface {
  Vec3 anchor = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double extent_u = 1.0;
  double extent_v = 1.0;

  /// Deterministic in-plane basis: built from global z unless the normal is
  /// nearly vertical, then from global x.
  std::pair<Vec3, Vec3> axes() const {
    const Vec3 ref =
        std::abs(normal.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    const Vec3 u = normal.cross(ref).normalized();
    const Vec3 v = normal.cross(u);
    return {u, v};
  }

  double signed_distance(const Vec3& p) const {
    return (p - anchor).dot(normal);
  }

  Vec3 mirror(const Vec3& p) const {
    return p - 2.0 * signed_distance(p) * normal;
  }

  /// True when a point already on the plane lies within the extents.
  bool within_extents(const Vec3& p) const {
    const auto [u, v] = axes();
    const Vec3 d = p - anchor;
    return std::abs(d.dot(u)) <= extent_u && std::abs(d.dot(v)) <= extent_v;
  }

  /// True when the open segment a->b crosses this finite rectangle.
  bool occludes_segment(const Vec3& a, const Vec3& b) const {
    const double ha = signed_distance(a);
    const double hb = signed_distance(b);
    if (ha * hb >= 0.0) return false;  // same side or touching
    const double t = ha / (ha - hb);
    constexpr double eps = 1e-9;
    if (t <= eps || t >= 1.0 - eps) return false;
    return within_extents(a + t * (b - a));
  }

  void validate() const {
    if (std::abs(normal.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("surface normal must be unit length");
    if (!(extent_u > 0.0) || !(extent_v > 0.0))
      throw std::invalid_argument("surface extents must be positive");
  }
};

struct SimPath {
  enum class Kind { Los, Nlos };
  Kind kind = Kind::Los;
  std::optional<IncidencePoint> ip;   // set iff NLOS
  cd gain{0.0, 0.0};                  // rho
  MeasurementVector true_measurement;
  double strength = 0.0;              // eta = |gain|^2
  int surface_index = -1;
};

struct SignalConfig {
  double carrier_hz = 27.2e9;
  double subcarrier_spacing_hz = 120e3;
  std::vector<int> active_subcarriers;   // strictly increasing kappa values
  int n_ue_beams = 15;
  int n_bs_el_beams = 4;
  int n_bs_az_beams = 34;
  double noise_power = 0.0;              // complex noise variance per sample

  /// CSI-RS on every 4th of 4x198 subcarriers, 120 kHz spacing, 27.2 GHz
  /// carrier, 15 UE beams and a 4x34 BS beam grid.
  static SignalConfig defaults() {
    SignalConfig c;
    c.active_subcarriers.reserve(198);
    for (int k = 0; k < 4 * 198; k += 4) c.active_subcarriers.push_back(k);
    return c;
  }

  void validate() const {
    if (active_subcarriers.empty())
      throw std::invalid_argument("no active subcarriers");
    for (std::size_t i = 1; i < active_subcarriers.size(); ++i)
      if (active_subcarriers[i] <= active_subcarriers[i - 1])
        throw std::invalid_argument(
            "active subcarriers must be strictly increasing");
    if (n_ue_beams <= 0 || n_bs_el_beams <= 0 || n_bs_az_beams <= 0)
      throw std::invalid_argument("beam counts must be positive");
    if (!(subcarrier_spacing_hz > 0.0))
      throw std::invalid_argument("subcarrier spacing must be positive");
    if (noise_power < 0.0)
      throw std::invalid_argument("noise power must be nonnegative");
  }
};

/// Beam pointing grids plus a parametric main-lobe gain model. Gains are
/// amplitude factors; the power pattern is Gaussian with the configured
/// 3 dB widths (an ideal-URA main-lobe approximation). The UE array has no
/// elevation selectivity.
struct BeamCodebook {
  std::vector<double> ue_az;   // rad, one per UE beam
  std::vector<double> bs_az;   // rad, one per BS azimuth beam
  std::vector<double> bs_el;   // rad, one per BS elevation beam
  double bs_width_az = deg_to_rad(4.1);    // 3 dB power widths
  double bs_width_el = deg_to_rad(10.4);
  double ue_width_az = deg_to_rad(13.0);

  static std::vector<double> uniform_grid(double lo, double hi, int n) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i)
      g[i] = n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1);
    return g;
  }

  /// BS beams span +-60 deg azimuth and +-15 deg elevation; UE beams span
  /// +-45 deg azimuth.
  static BeamCodebook defaults() {
    BeamCodebook c;
    c.ue_az = uniform_grid(deg_to_rad(-45), deg_to_rad(45), 15);
    c.bs_az = uniform_grid(deg_to_rad(-60), deg_to_rad(60), 34);
    c.bs_el = uniform_grid(deg_to_rad(-15), deg_to_rad(15), 4);
    return c;
  }

  static double lobe_power(double offset, double width_3db) {
    const double x = 2.0 * offset / width_3db;
    return std::exp2(-x * x);
  }

  double ue_gain(int g1, double az) const {
    return std::sqrt(lobe_power(wrap_pi(az - ue_az[g1]), ue_width_az));
  }

  double bs_gain(int g2, int g3, double az, double el) const {
    return std::sqrt(lobe_power(wrap_pi(az - bs_az[g3]), bs_width_az) *
                     lobe_power(el - bs_el[g2], bs_width_el));
  }

  void validate(const SignalConfig& signal) const {
    if (int(ue_az.size()) != signal.n_ue_beams ||
        int(bs_az.size()) != signal.n_bs_az_beams ||
        int(bs_el.size()) != signal.n_bs_el_beams)
      throw std::invalid_argument("codebook size does not match beam counts");
    if (!(bs_width_az > 0) || !(bs_width_el > 0) || !(ue_width_az > 0))
      throw std::invalid_argument("beam widths must be positive");
  }
};

/// Diagonal measurement noise, one std dev per component of z.
struct NoiseModel {
  double toa_std = 0.0;      // s
  double aoa_az_std = 0.0;   // rad
  double aoa_el_std = 0.0;
  double aod_az_std = 0.0;
  double aod_el_std = 0.0;

  Mat5 covariance() const {
    Mat5 r = Mat5::Zero();
    r.diagonal() << toa_std * toa_std, aoa_az_std * aoa_az_std,
        aoa_el_std * aoa_el_std, aod_az_std * aod_az_std,
        aod_el_std * aod_el_std;
    return r;
  }

  void validate() const {
    for (double s : {toa_std, aoa_az_std, aoa_el_std, aod_az_std, aod_el_std})
      if (s < 0.0)
        throw std::invalid_argument("noise std devs must be nonnegative");
  }
};

/// Constant bias when jitter_std is zero, otherwise one Gaussian draw per
/// frame around the mean.
struct ClockBiasModel {
  double mean_s = 0.0;
  double jitter_std_s = 0.0;

  template <class Rng>
  double sample(Rng& rng) const {
    std::normal_distribution<double> n01(0.0, 1.0);
    return mean_s + jitter_std_s * n01(rng);
  }
};

struct TrajectoryPoint {
  double timestamp = 0.0;
  UEState ue;
};

struct ScenarioConfig {
  BSState bs;
  std::vector<TrajectoryPoint> trajectory;
  std::vector<Surface> surfaces;
  NoiseModel measurement_noise;
  ClockBiasModel clock_bias;
  SignalConfig signal = SignalConfig::defaults();
  BeamCodebook codebook = BeamCodebook::defaults();
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (trajectory.empty())
      throw std::invalid_argument("trajectory must be non-empty");
    for (const auto& s : surfaces) s.validate();
    measurement_noise.validate();
    signal.validate();
    codebook.validate(signal);
  }
};

/// Independent RNG stream for one frame, derived from the scenario seed.
inline std::mt19937_64 make_frame_rng(std::uint64_t seed,
                                      std::uint64_t frame_index) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32),
                    std::uint32_t(frame_index),
                    std::uint32_t(frame_index >> 32)};
  return std::mt19937_64(seq);
}

namespace detail {

inline cd path_gain(double prop_distance_m, double carrier_hz) {
  const double eta = 1.0 / (prop_distance_m * prop_distance_m);
  const double cycles = std::fmod(carrier_hz * prop_distance_m / kSpeedOfLight,
                                  1.0);
  return std::polar(std::sqrt(eta), -2.0 * kPi * cycles);
}

}  // namespace detail

/// Emits the LOS path plus one specular NLOS path per surface whose
/// image-source reflection lands inside the surface extents and is not
/// occluded by another surface. Surfaces with no valid reflection are
/// skipped. Path strength follows free-space 1/d^2 over the full path
/// length with unit reflection loss.
inline std::vector<SimPath> generate_paths(const BSState& bs,
                                           const UEState& ue,
                                           const std::vector<Surface>& surfaces,
                                           double carrier_hz = 27.2e9) {
  if ((ue.position - bs.position).norm() == 0.0)
    throw std::invalid_argument("degenerate geometry");

  std::vector<SimPath> paths;
  SimPath los;
  los.kind = SimPath::Kind::Los;
  los.true_measurement = measurement_function(ue, bs);
  const double d_los = (ue.position - bs.position).norm();
  los.gain = detail::path_gain(d_los, carrier_hz);
  los.strength = std::norm(los.gain);
  paths.push_back(los);

  for (std::size_t si = 0; si < surfaces.size(); ++si) {
    const Surface& s = surfaces[si];
    const double hb = s.signed_distance(bs.position);
    const double hu = s.signed_distance(ue.position);
    if (hb * hu <= 0.0) continue;  // opposite sides or on the plane

    const Vec3 img = s.mirror(bs.position);
    const Vec3 dir = ue.position - img;
    const double denom = dir.dot(s.normal);
    if (denom == 0.0) continue;
    const double t = (s.anchor - img).dot(s.normal) / denom;
    if (t <= 0.0 || t >= 1.0) continue;
    const Vec3 ip = img + t * dir;
    if (!s.within_extents(ip)) continue;

    bool occluded = false;
    for (std::size_t sj = 0; sj < surfaces.size() && !occluded; ++sj) {
      if (sj == si) continue;
      occluded = surfaces[sj].occludes_segment(bs.position, ip) ||
                 surfaces[sj].occludes_segment(ip, ue.position);
    }
    if (occluded) continue;

    SimPath p;
    p.kind = SimPath::Kind::Nlos;
    p.ip = IncidencePoint{ip};
    p.surface_index = int(si);
    p.true_measurement = measurement_function(ue, bs, p.ip);
    const double d = (ip - bs.position).norm() + (ue.position - ip).norm();
    p.gain = detail::path_gain(d, carrier_hz);
    p.strength = std::norm(p.gain);
    paths.push_back(p);
  }
  return paths;
}

/// Path-level measurement synthesis: independent Gaussian perturbation per
/// component plus one clock-bias sample added to every TOA in the frame.
/// The returned frame keeps the ground-truth association for oracles.
template <class Rng>
MeasurementFrame synthesize_measurements(const std::vector<SimPath>& paths,
                                         const UEState& ue,
                                         const NoiseModel& noise,
                                         const ClockBiasModel& bias_model,
                                         Rng& rng, double timestamp = 0.0) {
  noise.validate();
  std::normal_distribution<double> n01(0.0, 1.0);
  const double frame_bias = bias_model.sample(rng);

  MeasurementFrame frame;
  frame.timestamp = timestamp;
  frame.truth.emplace();
  frame.truth->ue = ue;
  frame.truth->ue.clock_bias = ue.clock_bias + frame_bias;

  for (const SimPath& p : paths) {
    PathMeasurement pm;
    pm.z = p.true_measurement;
    pm.z.toa += frame_bias + noise.toa_std * n01(rng);
    pm.z.aoa_az = wrap_pi(pm.z.aoa_az + noise.aoa_az_std * n01(rng));
    pm.z.aoa_el += noise.aoa_el_std * n01(rng);
    pm.z.aod_az = wrap_pi(pm.z.aod_az + noise.aod_az_std * n01(rng));
    pm.z.aod_el += noise.aod_el_std * n01(rng);
    pm.strength = p.strength;
    pm.covariance = noise.covariance();
    frame.paths.push_back(pm);

    PathTruth t;
    t.is_los = p.kind == SimPath::Kind::Los;
    t.surface_index = p.surface_index;
    t.true_z = p.true_measurement;
    t.true_z.toa += frame_bias;
    if (p.ip) t.ip = p.ip->position;
    frame.truth->paths.push_back(t);
  }
  return frame;
}

/// Signal-level synthesis of one beam sweep: for every beam triple and
/// active subcarrier,
///   y = sum_i rho_i g_ue g_bs exp(-j 2 pi kappa df tau_i) p + n
/// with unit-modulus QPSK pilots and complex white noise.
template <class Rng>
RawBeamspace synthesize_beamspace(const std::vector<SimPath>& paths,
                                  const BeamCodebook& codebook,
                                  const SignalConfig& signal, Rng& rng) {
  signal.validate();
  codebook.validate(signal);

  RawBeamspace raw;
  raw.dims = {signal.n_ue_beams, signal.n_bs_el_beams, signal.n_bs_az_beams,
              int(signal.active_subcarriers.size())};
  raw.active_subcarriers = signal.active_subcarriers;
  raw.subcarrier_spacing_hz = signal.subcarrier_spacing_hz;
  raw.symbols.resize(raw.dims.size());
  raw.pilots.resize(raw.dims.size());

  std::uniform_int_distribution<int> qpsk(0, 3);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double noise_scale = std::sqrt(signal.noise_power / 2.0);

  for (int g1 = 0; g1 < raw.dims.n_ue; ++g1) {
    for (int g2 = 0; g2 < raw.dims.n_bs_el; ++g2) {
      for (int g3 = 0; g3 < raw.dims.n_bs_az; ++g3) {
        std::vector<cd> amp(paths.size());
        for (std::size_t i = 0; i < paths.size(); ++i) {
          const MeasurementVector& m = paths[i].true_measurement;
          amp[i] = paths[i].gain * codebook.ue_gain(g1, m.aoa_az) *
                   codebook.bs_gain(g2, g3, m.aod_az, m.aod_el);
        }
        for (int k = 0; k < raw.dims.n_subc; ++k) {
          const double kappa = raw.active_subcarriers[k];
          const cd pilot =
              std::polar(1.0, kPi / 4.0 + qpsk(rng) * kPi / 2.0);
          cd y{0.0, 0.0};
          for (std::size_t i = 0; i < paths.size(); ++i) {
            const double phase = -2.0 * kPi * kappa *
                                 signal.subcarrier_spacing_hz *
                                 paths[i].true_measurement.toa;
            y += amp[i] * std::polar(1.0, std::fmod(phase, 2.0 * kPi));
          }
          y *= pilot;
          y += cd(noise_scale * n01(rng), noise_scale * n01(rng));
          const std::size_t idx = raw.dims.index(g1, g2, g3, k);
          raw.symbols[idx] = y;
          raw.pilots[idx] = pilot;
        }
      }
    }
  }
  return raw;
}

}  // namespace mmpos
