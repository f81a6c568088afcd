#include <catch2/catch_amalgamated.hpp>

#include <mmpos/levenberg_marquardt.hpp>

using namespace mmpos;
using Eigen::VectorXd;

TEST_CASE("lm solves a linear least-squares problem exactly") {
  // r(x) = A x - b with A 4x2 full rank; optimum is the normal-equation
  // solution.
  Eigen::MatrixXd a(4, 2);
  a << 1, 0, 0, 1, 1, 1, 2, -1;
  VectorXd b(4);
  b << 1, 2, 2, 1;
  auto res = [&](const VectorXd& x) -> VectorXd { return a * x - b; };
  LMResult out = lm_minimize(res, VectorXd::Zero(2));
  VectorXd expected = (a.transpose() * a).ldlt().solve(a.transpose() * b);
  CHECK(out.converged);
  CHECK((out.x - expected).norm() < 1e-8);
}

TEST_CASE("lm reaches the rosenbrock minimum") {
  auto res = [](const VectorXd& x) -> VectorXd {
    VectorXd r(2);
    r << 10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0];
    return r;
  };
  VectorXd x0(2);
  x0 << -1.2, 1.0;
  LMOptions opts;
  opts.max_iterations = 400;
  LMResult out = lm_minimize(res, x0, opts);
  CHECK(out.converged);
  CHECK(out.x[0] == Catch::Approx(1.0).margin(1e-6));
  CHECK(out.x[1] == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("lm respects box constraints") {
  // Unconstrained optimum at (3, -2); box keeps x inside [-1, 1]^2.
  auto res = [](const VectorXd& x) -> VectorXd {
    VectorXd r(2);
    r << x[0] - 3.0, x[1] + 2.0;
    return r;
  };
  LMOptions opts;
  opts.lower = VectorXd::Constant(2, -1.0);
  opts.upper = VectorXd::Constant(2, 1.0);
  LMResult out = lm_minimize(res, VectorXd::Zero(2), opts);
  CHECK(out.x[0] <= 1.0 + 1e-15);
  CHECK(out.x[1] >= -1.0 - 1e-15);
  CHECK(out.x[0] == Catch::Approx(1.0).margin(1e-9));
  CHECK(out.x[1] == Catch::Approx(-1.0).margin(1e-9));
}

TEST_CASE("lm starting at the optimum stays there") {
  auto res = [](const VectorXd& x) -> VectorXd {
    VectorXd r(1);
    r << x[0] * x[0];
    return r;
  };
  LMResult out = lm_minimize(res, VectorXd::Zero(1));
  CHECK(out.converged);
  CHECK(out.cost < 1e-20);
}

TEST_CASE("lm never increases the cost") {
  auto res = [](const VectorXd& x) -> VectorXd {
    VectorXd r(3);
    r << std::sin(x[0]) + 0.5, x[1] * x[1] - 2.0, x[0] * x[1] - 1.0;
    return r;
  };
  VectorXd x0(2);
  x0 << 2.0, -3.0;
  const double initial_cost = res(x0).squaredNorm();
  LMResult out = lm_minimize(res, x0);
  CHECK(out.cost <= initial_cost);
}
