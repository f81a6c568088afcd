// Incidence-point mapping for NLOS paths: closed-form two-ray
// initialization followed by a sigma-point least-squares refinement that
// minimizes the full Mahalanobis measurement residual (all five components,
// including the delay) with Levenberg-Marquardt per sigma point.

#pragma once

#include <mmpos/geometry.hpp>
#include <mmpos/levenberg_marquardt.hpp>
#include <mmpos/measurement.hpp>
#include <mmpos/positioning.hpp>

#include <Eigen/Dense>

#include <stdexcept>

namespace mmpos {

struct IPEstimate {
  Vec3 position = Vec3::Zero();
  double residual_cost = 0.0;
  int frame_index = -1;
  int path_index = -1;
  bool converged = true;
  int n_sigma_converged = 0;
};

/// Point minimizing the summed squared distance to the departure ray
/// {p_BS + s u_BS} and the arrival ray {ue_fix + t u_UE}; equals the
/// midpoint of their common perpendicular. The delay is deliberately
/// unused. Throws when the rays are (near-)parallel.
inline Vec3 init_ip(const PathMeasurement& meas, const BSState& bs,
                    const Vec3& ue_fix, const EulerAngles& ue_orientation) {
  const Vec3 u_bs = aod_unit_global(bs, meas.z.aod_az, meas.z.aod_el);
  const Vec3 u_ue =
      aoa_unit_global(ue_orientation, meas.z.aoa_az, meas.z.aoa_el);
  if (u_bs.cross(u_ue).norm() <= 1e-6)
    throw std::runtime_error("degenerate ray pair");
  const Mat3 p_bs = Mat3::Identity() - u_bs * u_bs.transpose();
  const Mat3 p_ue = Mat3::Identity() - u_ue * u_ue.transpose();
  return (p_bs + p_ue).ldlt().solve(p_bs * bs.position + p_ue * ue_fix);
}

/// Mahalanobis cost of one NLOS measurement at a candidate incidence point,
/// with the UE fixed at the given position/orientation/bias.
inline double ip_cost(const PathMeasurement& meas, const BSState& bs,
                      const Vec3& ue_fix, const EulerAngles& ue_orientation,
                      double bias, const Vec3& ip) {
  const Eigen::LLT<Mat5> llt(meas.covariance);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("measurement covariance not invertible");
  UEState ue;
  ue.position = ue_fix;
  ue.orientation = ue_orientation;
  ue.clock_bias = bias;
  const MeasurementVector h =
      measurement_function(ue, bs, IncidencePoint{ip});
  Eigen::Matrix<double, 5, 1> d = h.vec() - meas.z.vec();
  d[1] = wrap_pi(d[1]);
  d[3] = wrap_pi(d[3]);
  return llt.matrixL().solve(d).squaredNorm();
}

struct MappingOptions {
  double unscented_lambda = -2.0;   // spread 3 - n for n = 5
  LMOptions lm = [] {
    LMOptions o;
    o.max_iterations = 200;
    o.cost_tol = 1e-12;
    return o;
  }();
};

/// Sigma-point least squares (2n+1 points from the measurement
/// distribution): one LM solve per perturbed measurement starting at
/// `init`, unweighted average of the solutions. When more than half of the
/// solves fail the estimate falls back to the init and is flagged.
inline IPEstimate refine_ip(const PathMeasurement& meas, const BSState& bs,
                            const Vec3& ue_fix,
                            const EulerAngles& ue_orientation, double bias,
                            const Vec3& init,
                            const MappingOptions& options = {}) {
  constexpr int n = 5;
  if (options.unscented_lambda + n <= 0.0)
    throw std::invalid_argument("unscented spread must satisfy n + lambda > 0");
  const Eigen::LLT<Mat5> llt(meas.covariance);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("measurement covariance not invertible");
  const Mat5 whitener = llt.matrixL().solve(Mat5::Identity());

  // Symmetric PSD square root of (n + lambda) R gives the sigma offsets.
  const Eigen::SelfAdjointEigenSolver<Mat5> eig(
      (n + options.unscented_lambda) * meas.covariance);
  const Mat5 sqrt_m =
      eig.eigenvectors() *
      eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
      eig.eigenvectors().transpose();

  std::vector<Eigen::Matrix<double, 5, 1>> sigma_z;
  sigma_z.push_back(meas.z.vec());
  for (int j = 0; j < n; ++j) {
    sigma_z.push_back(meas.z.vec() + sqrt_m.col(j));
    sigma_z.push_back(meas.z.vec() - sqrt_m.col(j));
  }

  UEState ue;
  ue.position = ue_fix;
  ue.orientation = ue_orientation;
  ue.clock_bias = bias;

  Vec3 mean = Vec3::Zero();
  int n_converged = 0;
  for (const auto& z : sigma_z) {
    const auto residual = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      const MeasurementVector h =
          measurement_function(ue, bs, IncidencePoint{Vec3(x)});
      Eigen::Matrix<double, 5, 1> d = h.vec() - z;
      d[1] = wrap_pi(d[1]);
      d[3] = wrap_pi(d[3]);
      return whitener * d;
    };
    const LMResult fit = lm_minimize(residual, init, options.lm);
    mean += fit.x;
    if (fit.converged) ++n_converged;
  }

  IPEstimate out;
  out.n_sigma_converged = n_converged;
  const int n_failed = int(sigma_z.size()) - n_converged;
  if (2 * n_failed > int(sigma_z.size())) {
    out.position = init;
    out.converged = false;
  } else {
    out.position = mean / double(sigma_z.size());
    out.converged = true;
  }
  out.residual_cost =
      ip_cost(meas, bs, ue_fix, ue_orientation, bias, out.position);
  return out;
}

}  // namespace mmpos
