// Coordinate conventions, Euler rotations, and the forward measurement
// function mapping BS/UE states (and an optional incidence point) to
// TOA / AOA / AOD. All angles are radians, all distances meters.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>

namespace mmpos {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Wraps an angle to (-pi, pi].
inline double wrap_pi(double angle) {
  double y = std::fmod(angle + kPi, 2.0 * kPi);
  if (y <= 0.0) y += 2.0 * kPi;
  return y - kPi;
}

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Roll/pitch/yaw, applied as Rz(yaw) * Ry(pitch) * Rx(roll).
struct EulerAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  /// Canonical form: pitch in [-pi/2, pi/2], roll and yaw in (-pi, pi].
  /// Uses the ZYX identity (r, p, y) ~ (r+pi, pi-p, y+pi); the rotation
  /// matrix is unchanged.
  EulerAngles normalized() const {
    EulerAngles a{wrap_pi(roll), wrap_pi(pitch), wrap_pi(yaw)};
    if (std::abs(a.pitch) > kPi / 2.0) {
      a.roll = wrap_pi(a.roll + kPi);
      a.pitch = wrap_pi(kPi - a.pitch);
      a.yaw = wrap_pi(a.yaw + kPi);
    }
    return a;
  }

  Vec3 vec() const { return {roll, pitch, yaw}; }
  static EulerAngles from_vec(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

/// Composes Rz(yaw) * Ry(pitch) * Rx(roll).
inline Mat3 euler_to_rotation(const EulerAngles& angles) {
  const double ca = std::cos(angles.roll), sa = std::sin(angles.roll);
  const double cb = std::cos(angles.pitch), sb = std::sin(angles.pitch);
  const double cg = std::cos(angles.yaw), sg = std::sin(angles.yaw);
  Mat3 rz, ry, rx;
  rz << cg, -sg, 0, sg, cg, 0, 0, 0, 1;
  ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
  rx << 1, 0, 0, 0, ca, -sa, 0, sa, ca;
  return rz * ry * rx;
}

struct BSState {
  Vec3 position = Vec3::Zero();      // m
  EulerAngles orientation;           // rad

  Mat3 rotation() const { return euler_to_rotation(orientation); }
};

struct UEState {
  Vec3 position = Vec3::Zero();      // m
  EulerAngles orientation;           // rad
  double clock_bias = 0.0;           // s

  Mat3 rotation() const { return euler_to_rotation(orientation); }
};

struct IncidencePoint {
  Vec3 position = Vec3::Zero();      // m
};

/// Per-path channel parameters: delay plus the AOA/AOD angle pairs.
struct MeasurementVector {
  double toa = 0.0;       // s, includes clock bias
  double aoa_az = 0.0;    // rad
  double aoa_el = 0.0;    // rad
  double aod_az = 0.0;    // rad
  double aod_el = 0.0;    // rad

  Eigen::Matrix<double, 5, 1> vec() const {
    Eigen::Matrix<double, 5, 1> v;
    v << toa, aoa_az, aoa_el, aod_az, aod_el;
    return v;
  }
  static MeasurementVector from_vec(const Eigen::Matrix<double, 5, 1>& v) {
    return {v[0], v[1], v[2], v[3], v[4]};
  }
};

/// Azimuth/elevation of a direction vector; azimuth = arctan2(q2, q1) in
/// (-pi, pi], elevation = arcsin(q3/|q|). The zenith azimuth convention is
/// arctan2(0, 0) = 0.
inline std::pair<double, double> direction_to_angles(const Vec3& q) {
  const double n = q.norm();
  if (n == 0.0) throw std::invalid_argument("degenerate direction");
  const double az = wrap_pi(std::atan2(q.y(), q.x()));
  const double el = std::asin(std::clamp(q.z() / n, -1.0, 1.0));
  return {az, el};
}

/// Unit vector [cos az cos el, sin az cos el, sin el].
inline Vec3 angles_to_unit_vector(double az, double el) {
  const double ce = std::cos(el);
  return {std::cos(az) * ce, std::sin(az) * ce, std::sin(el)};
}

/// Forward measurement function. LOS when `ip` is absent, NLOS otherwise.
/// TOA includes the UE clock bias; AOA is computed in the UE local frame
/// via R_UE * (target - p_UE), AOD in the BS local frame via
/// R_BS * (target - p_BS), target being the other endpoint (LOS) or the
/// incidence point (NLOS).
inline MeasurementVector measurement_function(
    const UEState& ue, const BSState& bs,
    const std::optional<IncidencePoint>& ip = std::nullopt) {
  MeasurementVector m;
  Vec3 q_aoa, q_aod;
  if (!ip) {
    const double d = (bs.position - ue.position).norm();
    if (d == 0.0) throw std::invalid_argument("degenerate geometry");
    m.toa = d / kSpeedOfLight + ue.clock_bias;
    q_aoa = ue.rotation() * (bs.position - ue.position);
    q_aod = bs.rotation() * (ue.position - bs.position);
  } else {
    const Vec3& p = ip->position;
    const double d_ue = (p - ue.position).norm();
    const double d_bs = (p - bs.position).norm();
    if (d_ue == 0.0 || d_bs == 0.0)
      throw std::invalid_argument("degenerate geometry");
    m.toa = (d_ue + d_bs) / kSpeedOfLight + ue.clock_bias;
    q_aoa = ue.rotation() * (p - ue.position);
    q_aod = bs.rotation() * (p - bs.position);
  }
  std::tie(m.aoa_az, m.aoa_el) = direction_to_angles(q_aoa);
  std::tie(m.aod_az, m.aod_el) = direction_to_angles(q_aod);
  return m;
}

}  // namespace mmpos
