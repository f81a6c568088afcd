// BS pose calibration from LOS angle measurements taken at known UE poses:
// box-constrained weighted least squares over the 6-dim BS state, solved
// with Levenberg-Marquardt. Delays are never used (clock bias pollutes
// them) and neither are NLOS paths.

#pragma once

#include <mmpos/geometry.hpp>
#include <mmpos/levenberg_marquardt.hpp>
#include <mmpos/measurement.hpp>

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace mmpos {

/// One static UE location: its surveyed pose (with per-axis uncertainties)
/// and the LOS angle measurement (aoa_az, aoa_el, aod_az, aod_el).
struct CalibrationSample {
  UEState ue;
  Vec3 position_std{0.194, 0.187, 0.245};               // m
  Vec3 orientation_std{deg_to_rad(0.060), deg_to_rad(0.052),
                       deg_to_rad(1.136)};              // rad
  Vec4 los_angles = Vec4::Zero();
  Mat4 covariance = Mat4::Identity();
};

struct CalibrationOptions {
  Vec3 prior_halfwidth_pos{5.0, 5.0, 5.0};              // m
  Vec3 prior_halfwidth_ang{deg_to_rad(10), deg_to_rad(10), deg_to_rad(10)};
  bool inflate_ue_uncertainty = false;
  double los_tie_window_s = 1e-9;
  LMOptions lm;
};

struct CalibrationResult {
  BSState bs_estimate;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Index of the LOS path: the shortest delay, with ties inside the delay
/// tie window resolved toward the strongest path.
inline std::size_t select_los(const MeasurementFrame& frame,
                              double tie_window_s = 1e-9) {
  if (frame.paths.empty()) throw std::invalid_argument("no paths");
  double tau_min = frame.paths[0].z.toa;
  for (const auto& p : frame.paths) tau_min = std::min(tau_min, p.z.toa);
  std::size_t best = frame.paths.size();
  for (std::size_t i = 0; i < frame.paths.size(); ++i) {
    const auto& p = frame.paths[i];
    if (p.z.toa > tau_min + tie_window_s) continue;
    if (best == frame.paths.size() ||
        p.strength > frame.paths[best].strength)
      best = i;
  }
  return best;
}

/// Angular part of the forward model: (aoa_az, aoa_el, aod_az, aod_el).
inline Vec4 los_angles_of(const BSState& bs, const UEState& ue) {
  const MeasurementVector m = measurement_function(ue, bs);
  return {m.aoa_az, m.aoa_el, m.aod_az, m.aod_el};
}

/// Builds a calibration sample from a measurement frame by selecting the
/// LOS path and extracting its angular components and covariance block.
inline CalibrationSample sample_from_frame(const MeasurementFrame& frame,
                                           const UEState& ue_pose,
                                           double tie_window_s = 1e-9) {
  const std::size_t i = select_los(frame, tie_window_s);
  CalibrationSample s;
  s.ue = ue_pose;
  const MeasurementVector& z = frame.paths[i].z;
  s.los_angles << z.aoa_az, z.aoa_el, z.aod_az, z.aod_el;
  s.covariance = frame.paths[i].covariance.block<4, 4>(1, 1);
  return s;
}

namespace detail {

inline Vec4 wrap_angle_residual(Vec4 d) {
  d[0] = wrap_pi(d[0]);  // azimuths live on the circle
  d[2] = wrap_pi(d[2]);
  return d;
}

/// First-order propagation of the UE pose uncertainty into the angle
/// covariance, evaluated at the prior BS state.
inline Mat4 inflated_covariance(const CalibrationSample& s,
                                const BSState& bs) {
  Mat4 r = s.covariance;
  const double h = 1e-6;
  for (int j = 0; j < 3; ++j) {
    UEState up = s.ue, um = s.ue;
    up.position[j] += h;
    um.position[j] -= h;
    const Vec4 grad =
        wrap_angle_residual(los_angles_of(bs, up) - los_angles_of(bs, um)) /
        (2 * h);
    r += s.position_std[j] * s.position_std[j] * grad * grad.transpose();
  }
  Vec3 ang = s.ue.orientation.vec();
  for (int j = 0; j < 3; ++j) {
    UEState up = s.ue, um = s.ue;
    Vec3 ap = ang, am = ang;
    ap[j] += h;
    am[j] -= h;
    up.orientation = EulerAngles::from_vec(ap);
    um.orientation = EulerAngles::from_vec(am);
    const Vec4 grad =
        wrap_angle_residual(los_angles_of(bs, up) - los_angles_of(bs, um)) /
        (2 * h);
    r += s.orientation_std[j] * s.orientation_std[j] * grad *
         grad.transpose();
  }
  return r;
}

}  // namespace detail

/// Minimizes sum_k (h_k - z_k)^T R_k^-1 (h_k - z_k) over the BS pose within
/// the prior box centered at prior_center, starting from prior_center.
/// Angle residuals are wrapped. Requires at least three samples at
/// non-collinear UE positions.
inline CalibrationResult calibrate_bs(
    const std::vector<CalibrationSample>& samples, const BSState& prior_center,
    const CalibrationOptions& options = {}) {
  if (samples.size() < 3)
    throw std::invalid_argument("underdetermined calibration");
  Vec3 centroid = Vec3::Zero();
  for (const auto& s : samples) centroid += s.ue.position;
  centroid /= double(samples.size());
  Eigen::MatrixXd centered(3, samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k)
    centered.col(k) = samples[k].ue.position - centroid;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  if (svd.singularValues()[1] <
      1e-9 * std::max(1.0, svd.singularValues()[0]))
    throw std::invalid_argument("underdetermined calibration");

  // Whiteners L^-1 with R = L L^T, so |L^-1 d|^2 = d^T R^-1 d.
  std::vector<Mat4> whiteners(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Mat4 r = options.inflate_ue_uncertainty
                       ? detail::inflated_covariance(samples[k], prior_center)
                       : samples[k].covariance;
    const Eigen::LLT<Mat4> llt(r);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("sample covariance not positive definite");
    whiteners[k] =
        llt.matrixL().solve(Mat4::Identity());
  }

  const auto residual = [&](const Eigen::VectorXd& x) {
    BSState bs;
    bs.position = x.head<3>();
    bs.orientation = EulerAngles::from_vec(x.tail<3>());
    Eigen::VectorXd r(4 * samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const Vec4 d = detail::wrap_angle_residual(
          los_angles_of(bs, samples[k].ue) - samples[k].los_angles);
      r.segment<4>(4 * k) = whiteners[k] * d;
    }
    return r;
  };

  Eigen::VectorXd x0(6);
  x0 << prior_center.position, prior_center.orientation.vec();
  LMOptions lm = options.lm;
  Eigen::VectorXd lo(6), hi(6);
  lo << prior_center.position - options.prior_halfwidth_pos,
      prior_center.orientation.vec() - options.prior_halfwidth_ang;
  hi << prior_center.position + options.prior_halfwidth_pos,
      prior_center.orientation.vec() + options.prior_halfwidth_ang;
  lm.lower = lo;
  lm.upper = hi;

  const LMResult fit = lm_minimize(residual, x0, lm);
  CalibrationResult out;
  out.bs_estimate.position = fit.x.head<3>();
  out.bs_estimate.orientation = EulerAngles::from_vec(fit.x.tail<3>());
  out.final_cost = fit.cost;
  out.iterations = fit.iterations;
  out.converged = fit.converged;
  return out;
}

}  // namespace mmpos
