// UE position solvers: three LOS-only modes (RTT+AOD closed form,
// AOD+known height, full-measurement weighted NLS) and the two multipath
// closed-form least-squares localizers (known bias, and joint
// position/bias). Multipath solvers intersect the per-path lines
// mu + gamma d (u_BS + u_UE); LOS paths collapse those lines to points and
// enter as point constraints.

#pragma once

#include <mmpos/geometry.hpp>
#include <mmpos/levenberg_marquardt.hpp>
#include <mmpos/measurement.hpp>

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmpos {

enum class PositioningMode {
  AodHeight,
  RttAod,
  RttAodAoa,
  MultipathRtt,
  MultipathTdoa,
};

inline std::string to_string(PositioningMode m) {
  switch (m) {
    case PositioningMode::AodHeight: return "aod-height";
    case PositioningMode::RttAod: return "rtt-aod";
    case PositioningMode::RttAodAoa: return "rtt-aod-aoa";
    case PositioningMode::MultipathRtt: return "multipath-rtt";
    case PositioningMode::MultipathTdoa: return "multipath-tdoa";
  }
  throw std::invalid_argument("unknown positioning mode");
}

inline PositioningMode positioning_mode_from_string(const std::string& s) {
  if (s == "aod-height") return PositioningMode::AodHeight;
  if (s == "rtt-aod") return PositioningMode::RttAod;
  if (s == "rtt-aod-aoa") return PositioningMode::RttAodAoa;
  if (s == "multipath-rtt") return PositioningMode::MultipathRtt;
  if (s == "multipath-tdoa") return PositioningMode::MultipathTdoa;
  throw std::invalid_argument("unknown positioning mode: " + s);
}

struct PositionFix {
  Vec3 position = Vec3::Zero();
  std::optional<double> clock_bias;   // s, multipath-tdoa only
  PositioningMode mode = PositioningMode::RttAod;
  double residual_cost = 0.0;
  int n_paths_used = 0;
  bool converged = true;
};

/// Departure direction in the global frame, from AOD angles.
inline Vec3 aod_unit_global(const BSState& bs, double aod_az, double aod_el) {
  return bs.rotation().transpose() * angles_to_unit_vector(aod_az, aod_el);
}

/// Arrival direction in the global frame, from AOA angles.
inline Vec3 aoa_unit_global(const EulerAngles& ue_orientation, double aoa_az,
                            double aoa_el) {
  return euler_to_rotation(ue_orientation).transpose() *
         angles_to_unit_vector(aoa_az, aoa_el);
}

/// RTT + AOD closed form: p = p_BS + d u_BS with d = (toa - bias) c.
inline PositionFix locate_rtt_aod(const PathMeasurement& meas,
                                  const BSState& bs, double bias = 0.0) {
  const double d = (meas.z.toa - bias) * kSpeedOfLight;
  if (!(d > 0.0)) throw std::runtime_error("invalid range");
  PositionFix fix;
  fix.position =
      bs.position + d * aod_unit_global(bs, meas.z.aod_az, meas.z.aod_el);
  fix.mode = PositioningMode::RttAod;
  fix.n_paths_used = 1;
  return fix;
}

/// AOD + known UE height: scales the departure ray to the known height and
/// reports the 2D intersection (z is the given height).
inline PositionFix locate_aod_height(const PathMeasurement& meas,
                                     const BSState& bs, double ue_height,
                                     double min_vertical = 1e-6) {
  const Vec3 u = aod_unit_global(bs, meas.z.aod_az, meas.z.aod_el);
  if (std::abs(u.z()) <= min_vertical)
    throw std::runtime_error("grazing ray");
  const double scale = (ue_height - bs.position.z()) / u.z();
  PositionFix fix;
  fix.position = {bs.position.x() + scale * u.x(),
                  bs.position.y() + scale * u.y(), ue_height};
  fix.mode = PositioningMode::AodHeight;
  fix.n_paths_used = 1;
  return fix;
}

/// Full-measurement LOS solver: minimizes the Mahalanobis residual of all
/// five components over the UE position, with orientation and clock bias
/// known. Initialized from the RTT + AOD closed form.
inline PositionFix locate_los_ls(const PathMeasurement& meas,
                                 const BSState& bs,
                                 const EulerAngles& ue_orientation,
                                 double bias, const LMOptions& lm_opts = {}) {
  const Eigen::LLT<Mat5> llt(meas.covariance);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("measurement covariance not invertible");
  const Mat5 whitener = llt.matrixL().solve(Mat5::Identity());

  const auto residual = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    UEState ue;
    ue.position = x;
    ue.orientation = ue_orientation;
    ue.clock_bias = bias;
    const MeasurementVector h = measurement_function(ue, bs);
    Eigen::Matrix<double, 5, 1> d = h.vec() - meas.z.vec();
    d[1] = wrap_pi(d[1]);
    d[3] = wrap_pi(d[3]);
    return whitener * d;
  };

  const Vec3 init = locate_rtt_aod(meas, bs, bias).position;
  const LMResult fit = lm_minimize(residual, init, lm_opts);
  PositionFix fix;
  fix.position = fit.x;
  fix.mode = PositioningMode::RttAodAoa;
  fix.residual_cost = fit.cost;
  fix.n_paths_used = 1;
  fix.converged = fit.converged;
  return fix;
}

/// One path rendered as the line mu + s nu that must contain the UE.
/// LOS geometry makes nu vanish (u_UE = -u_BS); such lines carry the
/// degenerate flag and later act as point constraints at mu.
struct PathLine {
  Vec3 mu = Vec3::Zero();
  Vec3 nu = Vec3::Zero();
  double weight = 0.0;
  bool degenerate = false;
};

inline PathLine build_path_line(const PathMeasurement& meas, const BSState& bs,
                                const EulerAngles& ue_orientation,
                                double bias) {
  const Vec3 u_bs = aod_unit_global(bs, meas.z.aod_az, meas.z.aod_el);
  const Vec3 u_ue =
      aoa_unit_global(ue_orientation, meas.z.aoa_az, meas.z.aoa_el);
  const double d = (meas.z.toa - bias) * kSpeedOfLight;
  PathLine line;
  line.mu = bs.position - d * u_ue;
  line.nu = u_bs + u_ue;
  line.weight = meas.strength;
  line.degenerate = line.nu.norm() < 1e-3;
  return line;
}

namespace detail {

inline Mat3 line_projector(const PathLine& line) {
  if (line.degenerate) return Mat3::Identity();
  const Vec3 nbar = line.nu.normalized();
  return Mat3::Identity() - nbar * nbar.transpose();
}

inline double condition_number(const Eigen::MatrixXd& a) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / smin;
}

}  // namespace detail

/// Multipath localization with known clock bias: weighted least-squares
/// intersection of the path lines (closed form). Degenerate (LOS) lines
/// contribute point terms instead of projections.
inline PositionFix locate_multipath_rtt(const MeasurementFrame& frame,
                                        const BSState& bs,
                                        const EulerAngles& ue_orientation,
                                        double bias,
                                        double condition_limit = 1e8) {
  if (frame.paths.empty()) throw std::invalid_argument("no paths");
  std::vector<PathLine> lines;
  for (const auto& p : frame.paths)
    lines.push_back(build_path_line(p, bs, ue_orientation, bias));

  Mat3 a = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  for (const PathLine& l : lines) {
    const Mat3 m = detail::line_projector(l);
    a += l.weight * m;
    rhs += l.weight * m * l.mu;
  }
  if (detail::condition_number(a) >= condition_limit)
    throw std::runtime_error("insufficient path diversity");

  PositionFix fix;
  fix.position = a.ldlt().solve(rhs);
  fix.mode = PositioningMode::MultipathRtt;
  fix.n_paths_used = int(lines.size());
  for (const PathLine& l : lines) {
    const Mat3 m = detail::line_projector(l);
    fix.residual_cost += l.weight * (m * (fix.position - l.mu)).squaredNorm();
  }
  return fix;
}

/// Joint position and clock-bias localization from two or more paths.
/// Internally the bias unknown is scaled to meters (beta = c b) so the
/// normal-matrix conditioning reflects geometry rather than units.
inline PositionFix locate_multipath_tdoa(const MeasurementFrame& frame,
                                         const BSState& bs,
                                         const EulerAngles& ue_orientation,
                                         double condition_limit = 1e8) {
  if (frame.paths.size() < 2)
    throw std::runtime_error("unobservable bias/position pair");

  Mat4 a = Mat4::Zero();
  Vec4 rhs = Vec4::Zero();
  struct Term {
    Eigen::Matrix<double, 3, 4> j;
    Mat3 m;
    Vec3 mu;
    double w;
  };
  std::vector<Term> terms;
  for (const auto& p : frame.paths) {
    const PathLine line = build_path_line(p, bs, ue_orientation, 0.0);
    const Vec3 u_ue =
        aoa_unit_global(ue_orientation, p.z.aoa_az, p.z.aoa_el);
    Term t;
    t.j << Mat3::Identity(), -u_ue;
    t.m = detail::line_projector(line);
    t.mu = line.mu;  // bias 0: p_BS - toa c u_UE
    t.w = p.strength;
    terms.push_back(t);
    a += t.w * t.j.transpose() * t.m * t.j;
    rhs += t.w * t.j.transpose() * t.m * t.mu;
  }
  if (detail::condition_number(a) >= condition_limit)
    throw std::runtime_error("unobservable bias/position pair");

  const Vec4 x = a.ldlt().solve(rhs);
  PositionFix fix;
  fix.position = x.head<3>();
  fix.clock_bias = x[3] / kSpeedOfLight;
  fix.mode = PositioningMode::MultipathTdoa;
  fix.n_paths_used = int(frame.paths.size());
  for (const Term& t : terms)
    fix.residual_cost += t.w * (t.m * (t.j * x - t.mu)).squaredNorm();
  return fix;
}

}  // namespace mmpos
