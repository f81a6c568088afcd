// Error metrics over the x-y plane: empirical CDF, MAE, and interpolated
// percentiles, matching the evaluation used for the positioning runs.

#pragma once

#include <mmpos/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mmpos {

struct ErrorReport {
  std::vector<double> errors_xy;                 // sorted ascending
  std::vector<std::pair<double, double>> cdf;    // (error, fraction <=)
  double mae = 0.0;

  /// Right-continuous empirical CDF evaluated at t.
  double fraction_below(double t) const {
    const auto it =
        std::upper_bound(errors_xy.begin(), errors_xy.end(), t);
    return double(it - errors_xy.begin()) / double(errors_xy.size());
  }

  /// Quantile by linear interpolation between order statistics.
  double quantile(double p) const {
    const std::size_t n = errors_xy.size();
    if (p <= 1.0 / double(n)) return errors_xy.front();
    if (p >= 1.0) return errors_xy.back();
    const double pos = p * double(n);
    const std::size_t k = std::size_t(std::ceil(pos)) - 1;
    const double frac = pos - double(k);
    if (k == 0) return errors_xy[0];
    return errors_xy[k - 1] + frac * (errors_xy[k] - errors_xy[k - 1]);
  }
};

inline ErrorReport report_from_errors(std::vector<double> errors) {
  if (errors.empty()) throw std::invalid_argument("no data");
  ErrorReport r;
  r.errors_xy = std::move(errors);
  std::sort(r.errors_xy.begin(), r.errors_xy.end());
  const std::size_t n = r.errors_xy.size();
  double sum = 0.0;
  r.cdf.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    sum += r.errors_xy[i];
    r.cdf.emplace_back(r.errors_xy[i], double(i + 1) / double(n));
  }
  r.mae = sum / double(n);
  return r;
}

/// Per-frame x-y errors between aligned estimate/truth sequences.
inline ErrorReport compute_error_cdf(const std::vector<Vec3>& estimates,
                                     const std::vector<Vec3>& ground_truth) {
  if (estimates.size() != ground_truth.size())
    throw std::invalid_argument("estimate/truth length mismatch");
  std::vector<double> errors(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i)
    errors[i] = (estimates[i] - ground_truth[i]).head<2>().norm();
  return report_from_errors(std::move(errors));
}

}  // namespace mmpos
