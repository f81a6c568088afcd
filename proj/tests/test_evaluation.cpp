#include <catch2/catch_amalgamated.hpp>

#include <mmpos/evaluation.hpp>

#include <random>

using namespace mmpos;

TEST_CASE("report over a small error list") {
  const ErrorReport r = report_from_errors({1, 2, 3, 4});
  CHECK(r.mae == Catch::Approx(2.5));
  CHECK(r.fraction_below(2.5) == 0.5);
  CHECK(r.fraction_below(0.5) == 0.0);
  CHECK(r.fraction_below(4.0) == 1.0);
}

TEST_CASE("all-zero errors give a step CDF at zero") {
  const ErrorReport r = report_from_errors({0, 0, 0});
  CHECK(r.mae == 0.0);
  CHECK(r.fraction_below(0.0) == 1.0);
  CHECK(r.cdf.front().second > 0.0);
  CHECK(r.cdf.back().second == 1.0);
}

TEST_CASE("empty input is rejected") {
  CHECK_THROWS_AS(report_from_errors({}), std::invalid_argument);
  CHECK_THROWS_AS(compute_error_cdf({Vec3::Zero()}, {}),
                  std::invalid_argument);
}

TEST_CASE("CDF is nondecreasing from >0 to 1") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01(0, 1);
  std::vector<double> errors;
  for (int i = 0; i < 500; ++i) errors.push_back(std::abs(n01(rng)));
  const ErrorReport r = report_from_errors(errors);
  double prev_e = -1, prev_f = 0;
  for (const auto& [e, f] : r.cdf) {
    CHECK(e >= prev_e);
    CHECK(f >= prev_f);
    prev_e = e;
    prev_f = f;
  }
  CHECK(r.cdf.back().second == 1.0);
}

TEST_CASE("percentile table is consistent with the CDF") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 10);
  std::vector<double> errors;
  for (int i = 0; i < 257; ++i) errors.push_back(u(rng));
  const ErrorReport r = report_from_errors(errors);
  for (double p : {0.1, 0.5, 0.9, 0.95}) {
    const double q = r.quantile(p);
    CHECK(r.fraction_below(q) >= p - 1e-9);
    // One order statistic to the left must fall below p.
    const double q_lo = q - 1e-9;
    CHECK(r.fraction_below(q_lo) <= p + 1.0 / errors.size());
  }
}

TEST_CASE("half-normal 90th percentile matches the analytic value") {
  // For |N(0,1)| the 0.9 quantile is the normal 0.95 quantile, 1.6449.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01(0, 1);
  std::vector<double> errors;
  for (int i = 0; i < 10000; ++i) errors.push_back(std::abs(n01(rng)));
  const ErrorReport r = report_from_errors(errors);
  CHECK(r.quantile(0.9) == Catch::Approx(1.6449).epsilon(0.03));
}

TEST_CASE("xy errors ignore the vertical component") {
  std::vector<Vec3> est{{3, 4, 100}};
  std::vector<Vec3> truth{{0, 0, 0}};
  const ErrorReport r = compute_error_cdf(est, truth);
  CHECK(r.mae == Catch::Approx(5.0));
}
