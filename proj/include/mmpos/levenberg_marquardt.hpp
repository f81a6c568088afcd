// Dense Levenberg-Marquardt for small nonlinear least-squares problems,
// with central-difference Jacobians and optional box constraints.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>

namespace mmpos {

struct LMOptions {
  int max_iterations = 100;
  double gradient_tol = 1e-10;    // stop when |J^T r|_inf below this
  double cost_tol = 1e-14;        // relative cost decrease per accepted step
  double step_tol = 1e-14;        // relative step size
  double fd_step = 1e-7;          // central-difference step
  double initial_lambda = 1e-3;
  double max_lambda = 1e14;
  std::optional<Eigen::VectorXd> lower;  // box constraint, elementwise
  std::optional<Eigen::VectorXd> upper;
};

struct LMResult {
  Eigen::VectorXd x;
  double cost = 0.0;              // sum of squared residuals
  int iterations = 0;
  bool converged = false;
};

/// Minimizes |r(x)|^2 for a residual function r: R^n -> R^m. Weighted
/// problems fold the weighting into r (whitened residuals). When bounds are
/// given, trial steps are projected onto the box.
inline LMResult lm_minimize(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
    Eigen::VectorXd x0, const LMOptions& opts = {}) {
  const auto clamp_box = [&opts](Eigen::VectorXd v) {
    if (opts.lower) v = v.cwiseMax(*opts.lower);
    if (opts.upper) v = v.cwiseMin(*opts.upper);
    return v;
  };

  LMResult out;
  out.x = clamp_box(std::move(x0));
  Eigen::VectorXd r = residual(out.x);
  out.cost = r.squaredNorm();
  const int n = static_cast<int>(out.x.size());
  double lambda = opts.initial_lambda;

  for (out.iterations = 0; out.iterations < opts.max_iterations;
       ++out.iterations) {
    Eigen::MatrixXd jac(r.size(), n);
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd xp = out.x, xm = out.x;
      xp[j] += opts.fd_step;
      xm[j] -= opts.fd_step;
      jac.col(j) = (residual(xp) - residual(xm)) / (2.0 * opts.fd_step);
    }
    const Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() < opts.gradient_tol) {
      out.converged = true;
      return out;
    }

    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    bool stepped = false;
    while (lambda <= opts.max_lambda) {
      Eigen::MatrixXd a = jtj;
      for (int j = 0; j < n; ++j)
        a(j, j) += lambda * (jtj(j, j) > 0 ? jtj(j, j) : 1.0);
      const Eigen::VectorXd dx = a.ldlt().solve(-grad);
      const Eigen::VectorXd x_new = clamp_box(out.x + dx);
      const Eigen::VectorXd r_new = residual(x_new);
      const double cost_new = r_new.squaredNorm();
      if (cost_new < out.cost) {
        const double decrease = out.cost - cost_new;
        const double step = (x_new - out.x).lpNorm<Eigen::Infinity>();
        out.x = x_new;
        r = r_new;
        out.cost = cost_new;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (decrease <= opts.cost_tol * std::max(out.cost, 1e-300) ||
            step <= opts.step_tol *
                        (opts.step_tol + out.x.lpNorm<Eigen::Infinity>())) {
          out.converged = true;
          return out;
        }
        break;
      }
      lambda *= 4.0;
    }
    if (!stepped) {
      // No improving step exists at any damping: treat a (numerically)
      // zero-residual point as converged, otherwise report the best iterate.
      out.converged = out.cost <= 1e-20 * std::max(1.0, double(r.size()));
      return out;
    }
  }
  return out;
}

}  // namespace mmpos
