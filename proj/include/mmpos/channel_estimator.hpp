// Beam-sweeping channel parameter estimation: per-bin channel estimates
// from pilots, strongest-beam detection, greedy multi-path extraction,
// centroid angle refinement over adjacent beams, and matched-filter delay
// estimation with parabolic refinement.

#pragma once

#include <mmpos/beamspace.hpp>
#include <mmpos/geometry.hpp>
#include <mmpos/measurement.hpp>
#include <mmpos/scenario.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mmpos {

/// Estimated beamspace channel plus the per-beam energy tensor
/// energy[g] = sum_k |h[g,k]|^2.
struct BeamspaceTensor {
  BeamTensorDims dims;
  std::vector<int> active_subcarriers;
  double subcarrier_spacing_hz = 0.0;
  std::vector<cd> h;
  std::vector<double> energy;

  const cd& at(int g1, int g2, int g3, int k) const {
    return h[dims.index(g1, g2, g3, k)];
  }
  double beam_energy(int g1, int g2, int g3) const {
    return energy[dims.beam_index(g1, g2, g3)];
  }
};

struct BeamTriple {
  int ue = 0;
  int bs_el = 0;
  int bs_az = 0;
};

/// Per-bin least-squares channel estimate h = p* y / |p|^2.
inline BeamspaceTensor estimate_beamspace_channel(const RawBeamspace& raw) {
  BeamspaceTensor t;
  t.dims = raw.dims;
  t.active_subcarriers = raw.active_subcarriers;
  t.subcarrier_spacing_hz = raw.subcarrier_spacing_hz;
  t.h.resize(raw.symbols.size());
  t.energy.assign(t.dims.beam_count(), 0.0);
  for (std::size_t i = 0; i < raw.symbols.size(); ++i) {
    const double p2 = std::norm(raw.pilots[i]);
    if (p2 == 0.0) throw std::invalid_argument("invalid pilot");
    t.h[i] = std::conj(raw.pilots[i]) * raw.symbols[i] / p2;
    t.energy[i / t.dims.n_subc] += std::norm(t.h[i]);
  }
  return t;
}

/// Beam triple with the largest energy; ties break toward the lowest
/// linear index.
inline BeamTriple detect_strongest(const BeamspaceTensor& t) {
  if (t.energy.empty()) throw std::invalid_argument("empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.energy.size(); ++i)
    if (t.energy[i] > t.energy[best]) best = i;
  const int g3 = int(best % t.dims.n_bs_az);
  const int g2 = int(best / t.dims.n_bs_az % t.dims.n_bs_el);
  const int g1 = int(best / t.dims.n_bs_az / t.dims.n_bs_el);
  return {g1, g2, g3};
}

namespace detail {

inline bool is_strict_local_max(const BeamspaceTensor& t, int g1, int g2,
                                int g3) {
  const double e = t.beam_energy(g1, g2, g3);
  for (int d1 = -1; d1 <= 1; ++d1)
    for (int d2 = -1; d2 <= 1; ++d2)
      for (int d3 = -1; d3 <= 1; ++d3) {
        if (d1 == 0 && d2 == 0 && d3 == 0) continue;
        const int a = g1 + d1, b = g2 + d2, c = g3 + d3;
        if (a < 0 || a >= t.dims.n_ue || b < 0 || b >= t.dims.n_bs_el ||
            c < 0 || c >= t.dims.n_bs_az)
          continue;
        if (t.beam_energy(a, b, c) >= e) return false;
      }
  return true;
}

inline bool adjacent(const BeamTriple& a, const BeamTriple& b) {
  return std::abs(a.ue - b.ue) <= 1 && std::abs(a.bs_el - b.bs_el) <= 1 &&
         std::abs(a.bs_az - b.bs_az) <= 1;
}

}  // namespace detail

/// Greedy multi-path beam selection. The strongest beam is always returned;
/// further candidates must be strict local maxima of the energy tensor,
/// outside the one-beam suppression neighborhood of every already selected
/// triple, and within min_rel_power_db of the strongest.
inline std::vector<BeamTriple> detect_paths(const BeamspaceTensor& t,
                                            int max_paths,
                                            double min_rel_power_db = -15.0) {
  if (max_paths < 1) throw std::invalid_argument("max_paths must be >= 1");
  std::vector<BeamTriple> selected{detect_strongest(t)};
  const double e0 =
      t.beam_energy(selected[0].ue, selected[0].bs_el, selected[0].bs_az);
  if (e0 <= 0.0 || max_paths == 1) return selected;

  struct Candidate {
    BeamTriple g;
    double energy;
  };
  std::vector<Candidate> candidates;
  for (int g1 = 0; g1 < t.dims.n_ue; ++g1)
    for (int g2 = 0; g2 < t.dims.n_bs_el; ++g2)
      for (int g3 = 0; g3 < t.dims.n_bs_az; ++g3)
        if (detail::is_strict_local_max(t, g1, g2, g3))
          candidates.push_back({{g1, g2, g3}, t.beam_energy(g1, g2, g3)});
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return a.energy > b.energy;
                   });

  for (const Candidate& c : candidates) {
    if (int(selected.size()) >= max_paths) break;
    if (10.0 * std::log10(c.energy / e0) < min_rel_power_db) break;
    bool suppressed = false;
    for (const BeamTriple& s : selected)
      suppressed = suppressed || detail::adjacent(c.g, s);
    if (!suppressed) selected.push_back(c.g);
  }
  return selected;
}

struct RefinedAngles {
  double aod_az = 0.0;
  double aod_el = 0.0;
  double aoa_az = 0.0;
};

/// Energy-weighted centroid of codebook angles over the adjacent-beam sets,
/// truncated at tensor edges. AOD uses the 3x3 BS (el, az) block at the
/// detected UE beam; AOA azimuth uses the adjacent UE beams at the detected
/// BS beam pair.
inline RefinedAngles refine_angles(const BeamspaceTensor& t, BeamTriple g,
                                   const BeamCodebook& codebook) {
  if (g.ue < 0 || g.ue >= t.dims.n_ue || g.bs_el < 0 ||
      g.bs_el >= t.dims.n_bs_el || g.bs_az < 0 || g.bs_az >= t.dims.n_bs_az)
    throw std::out_of_range("beam triple outside tensor");

  RefinedAngles out{codebook.bs_az[g.bs_az], codebook.bs_el[g.bs_el],
                    codebook.ue_az[g.ue]};

  double waz = 0, wel = 0, wsum = 0;
  for (int g2 = std::max(0, g.bs_el - 1);
       g2 <= std::min(t.dims.n_bs_el - 1, g.bs_el + 1); ++g2)
    for (int g3 = std::max(0, g.bs_az - 1);
         g3 <= std::min(t.dims.n_bs_az - 1, g.bs_az + 1); ++g3) {
      const double w = t.beam_energy(g.ue, g2, g3);
      waz += w * codebook.bs_az[g3];
      wel += w * codebook.bs_el[g2];
      wsum += w;
    }
  if (wsum > 0.0) {
    out.aod_az = waz / wsum;
    out.aod_el = wel / wsum;
  }

  double wue = 0, wue_sum = 0;
  for (int g1 = std::max(0, g.ue - 1);
       g1 <= std::min(t.dims.n_ue - 1, g.ue + 1); ++g1) {
    const double w = t.beam_energy(g1, g.bs_el, g.bs_az);
    wue += w * codebook.ue_az[g1];
    wue_sum += w;
  }
  if (wue_sum > 0.0) out.aoa_az = wue / wue_sum;
  return out;
}

/// Matched-filter delay estimate for one beam triple: maximizes
/// |sum_k h_k exp(j 2 pi kappa_k df tau)|^2 on a grid spanning one
/// unambiguous range, then refines with a three-point parabola.
inline double estimate_delay(const BeamspaceTensor& t, BeamTriple g,
                             int grid_points = 2048) {
  const double t_amb =
      unambiguous_delay_range(t.active_subcarriers, t.subcarrier_spacing_hz);
  const int n = t.dims.n_subc;
  const cd* h = &t.h[t.dims.index(g.ue, g.bs_el, g.bs_az, 0)];

  const auto filter_energy = [&](double tau) {
    cd acc{0.0, 0.0};
    for (int k = 0; k < n; ++k) {
      const double cycles =
          std::fmod(t.active_subcarriers[k] * t.subcarrier_spacing_hz * tau,
                    1.0);
      acc += h[k] * std::polar(1.0, 2.0 * kPi * cycles);
    }
    return std::norm(acc);
  };

  const double step = t_amb / grid_points;
  std::vector<double> s(grid_points);
  int best = 0;
  for (int i = 0; i < grid_points; ++i) {
    s[i] = filter_energy(i * step);
    if (s[i] > s[best]) best = i;
  }
  const double y0 = s[(best + grid_points - 1) % grid_points];
  const double y1 = s[best];
  const double y2 = s[(best + 1) % grid_points];
  const double denom = y0 - 2.0 * y1 + y2;
  const double delta = denom != 0.0 ? 0.5 * (y0 - y2) / denom : 0.0;
  double tau = best * step + std::clamp(delta, -1.0, 1.0) * step;
  tau = std::fmod(tau, t_amb);
  if (tau < 0.0) tau += t_amb;
  return tau;
}

/// Measurement covariance floors reported by the estimator. AOA elevation
/// is unresolved by the UE array and reported as 0 with a very large
/// variance.
struct ChannelEstimatorConfig {
  int max_paths = 4;
  double min_rel_power_db = -15.0;
  int delay_grid_points = 2048;
  double toa_std = 1e-9;                     // s
  double aoa_az_std = deg_to_rad(3.0);
  double aod_az_std = deg_to_rad(1.0);
  double aod_el_std = deg_to_rad(2.0);
  double aoa_el_variance = 1e4;              // rad^2
};

/// Full per-frame estimator: detect beams, refine angles, estimate delays,
/// and assemble PathMeasurements (strongest path first). Path strength is
/// the beam energy at the detected triple.
inline MeasurementFrame estimate_paths(const RawBeamspace& raw,
                                       const BeamCodebook& codebook,
                                       const ChannelEstimatorConfig& cfg = {},
                                       double timestamp = 0.0) {
  const BeamspaceTensor tensor = estimate_beamspace_channel(raw);
  const std::vector<BeamTriple> triples =
      detect_paths(tensor, cfg.max_paths, cfg.min_rel_power_db);

  MeasurementFrame frame;
  frame.timestamp = timestamp;
  for (const BeamTriple& g : triples) {
    const RefinedAngles angles = refine_angles(tensor, g, codebook);
    PathMeasurement pm;
    pm.z.toa = estimate_delay(tensor, g, cfg.delay_grid_points);
    pm.z.aoa_az = angles.aoa_az;
    pm.z.aoa_el = 0.0;
    pm.z.aod_az = angles.aod_az;
    pm.z.aod_el = angles.aod_el;
    pm.strength = tensor.beam_energy(g.ue, g.bs_el, g.bs_az);
    pm.covariance = Mat5::Zero();
    pm.covariance.diagonal() << cfg.toa_std * cfg.toa_std,
        cfg.aoa_az_std * cfg.aoa_az_std, cfg.aoa_el_variance,
        cfg.aod_az_std * cfg.aod_az_std, cfg.aod_el_std * cfg.aod_el_std;
    frame.paths.push_back(pm);
  }
  return frame;
}

}  // namespace mmpos
