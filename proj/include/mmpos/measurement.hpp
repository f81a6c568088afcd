// Per-path measurements with uncertainty, and the per-time-step frame that
// groups them. Frames may carry a ground-truth block used by test oracles
// and evaluation; estimators leave it empty.

#pragma once

#include <mmpos/geometry.hpp>

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace mmpos {

using Mat5 = Eigen::Matrix<double, 5, 5>;

struct PathMeasurement {
  MeasurementVector z;
  double strength = 1.0;           // path weight eta
  Mat5 covariance = Mat5::Identity();
};

/// Ground truth attached to a simulated path, keyed to the same index as
/// the measured path in the frame.
struct PathTruth {
  bool is_los = true;
  int surface_index = -1;          // -1 for LOS
  MeasurementVector true_z;        // noise-free measurement incl. frame bias
  std::optional<Vec3> ip;
};

struct FrameTruth {
  UEState ue;                      // clock_bias holds the effective frame bias
  std::vector<PathTruth> paths;
};

struct MeasurementFrame {
  double timestamp = 0.0;
  std::vector<PathMeasurement> paths;
  std::optional<FrameTruth> truth;
};

}  // namespace mmpos
