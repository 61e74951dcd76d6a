#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "deconv/gausswalk.hpp"

using namespace deconv;
using walk::walk_c;
using walk::walk_c_asymptotic;

namespace {

// Independent oracle for sum_{n >= first} n^{-d/2} exp(-q/2n): long direct
// summation with a plain integral tail bound, no Euler-Maclaurin machinery.
double brute_series(int d, double q, int first, long long terms = 20000000) {
  double acc = 0.0;
  for (long long n = first; n < first + terms; ++n)
    acc += std::pow(double(n), -0.5 * d) * std::exp(-0.5 * q / double(n));
  double a = double(first + terms);
  acc += std::pow(a, 1.0 - 0.5 * d) / (0.5 * d - 1.0);  // tail, exact enough at this a
  return acc;
}

}  // namespace

TEST_CASE("step density closed form and dimension guard", "[gausswalk]") {
  auto id3 = DiagonalCovariance::identity(3);
  REQUIRE(walk::step_density(id3, std::vector<double>(3, 0.0)) ==
          Catch::Approx(std::pow(kTwoPi, -1.5)).epsilon(1e-14));
  REQUIRE_THROWS_AS(
      walk::step_density(DiagonalCovariance({1.0, 4.0}), std::vector<double>(2, 0.0)),
      std::invalid_argument);
  REQUIRE(walk::step_density(DiagonalCovariance::isotropic(5, 2.0), std::vector<double>(5, 0.0)) ==
          Catch::Approx(std::pow(4.0 * kPi, -2.5)).epsilon(1e-14));
}

TEST_CASE("series value at the origin matches a brute-force oracle", "[gausswalk]") {
  auto id5 = DiagonalCovariance::identity(5);
  std::vector<double> zero(5, 0.0);
  auto w = walk_c(id5, zero, 1e-12);
  double oracle = std::pow(kTwoPi, -2.5) * brute_series(5, 0.0, 2);
  REQUIRE(w.value == Catch::Approx(oracle).epsilon(1e-9));
  REQUIRE(w.value == Catch::Approx(3.4508e-3).epsilon(1e-4));
  REQUIRE(w.tail_bound < 1e-12 * w.value + 1e-18);
}

TEST_CASE("series value at a generic point matches the oracle", "[gausswalk]") {
  auto sigma = DiagonalCovariance({1.0, 2.0, 0.5, 1.5});
  std::vector<double> x = {1.5, -0.7, 0.2, 2.0};
  double q = sigma.quadratic_form_inv(x);
  auto w = walk_c(sigma, x, 1e-12);
  double oracle = std::pow(kTwoPi, -2.0) / std::sqrt(sigma.det()) * brute_series(4, q, 2);
  REQUIRE(w.value == Catch::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("large-radius value approaches a_3 / r in three dimensions", "[gausswalk]") {
  auto id3 = DiagonalCovariance::identity(3);
  std::vector<double> x = {10.0, 0.0, 0.0};
  auto w = walk_c(id3, x, 1e-12);
  REQUIRE(std::fabs(w.value / (walk::amplitude_constant(3) / 10.0) - 1.0) < 0.02);
}

TEST_CASE("walk series is even", "[gausswalk]") {
  auto sigma = DiagonalCovariance({1.0, 3.0, 0.7});
  std::vector<double> x = {1.2, -0.4, 2.2}, mx = {-1.2, 0.4, -2.2};
  REQUIRE(walk_c(sigma, x).value == walk_c(sigma, mx).value);
}

TEST_CASE("asymptotic amplitude constants", "[gausswalk]") {
  REQUIRE(walk::amplitude_constant(3) == Catch::Approx(1.0 / (2.0 * kPi)).epsilon(1e-14));
  REQUIRE(walk::amplitude_constant(4) == Catch::Approx(1.0 / (2.0 * kPi * kPi)).epsilon(1e-14));
  REQUIRE(walk::amplitude_constant(3) == Catch::Approx(0.1591549).epsilon(1e-6));
  REQUIRE(walk::amplitude_constant(4) == Catch::Approx(0.0506606).epsilon(1e-5));
}

TEST_CASE("anisotropic asymptotics scale with the quadratic form", "[gausswalk]") {
  auto sigma = DiagonalCovariance({1.0, 1.0, 1.0, 1.0, 4.0});
  double r = 17.0;
  std::vector<double> along_soft(5, 0.0), along_e1(5, 0.0);
  along_soft[4] = r;
  along_e1[0] = r;
  double ratio = walk_c_asymptotic(sigma, along_soft) / walk_c_asymptotic(sigma, along_e1);
  REQUIRE(ratio == Catch::Approx(8.0).epsilon(1e-12));  // 4^{(d-2)/2}
  REQUIRE_THROWS_AS(walk_c_asymptotic(sigma, std::vector<double>(5, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("recurrence residual is small", "[gausswalk]") {
  auto id3 = DiagonalCovariance::identity(3);
  std::vector<double> zero3(3, 0.0);
  double c0 = walk_c(id3, zero3).value;
  REQUIRE(walk::walk_c_recurrence_residual(id3, zero3) <= 1e-4 * c0);

  auto id5 = DiagonalCovariance::identity(5);
  std::vector<double> x5 = {3.0, 0.0, 0.0, 0.0, 0.0};
  double c5 = walk_c(id5, x5).value;
  REQUIRE(walk::walk_c_recurrence_residual(id5, x5) <= 1e-3 * c5);
}

TEST_CASE("tail bound is sound under refinement", "[gausswalk]") {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> uq(0.0, 400.0);
  for (int t = 0; t < 100; ++t) {
    int d = 3 + (t % 4);
    double q = uq(rng);
    auto coarse = walk::walk_series_raw(d, q, 2, 1e-6, /*n_cap=*/40000);
    auto fine = walk::walk_series_raw(d, q, 2, 1e-6, /*n_cap=*/80000);
    INFO("d=" << d << " q=" << q);
    REQUIRE(std::fabs(fine.value - coarse.value) <= coarse.tail_bound + 1e-18);
  }
}

TEST_CASE("value depends on x only through the quadratic form", "[gausswalk]") {
  auto sigma = DiagonalCovariance({1.0, 4.0, 2.0});
  // both points have x . Sigma^{-1} x = 4
  std::vector<double> xa = {2.0, 0.0, 0.0}, xb = {0.0, 4.0, 0.0};
  REQUIRE(sigma.quadratic_form_inv(xa) == Catch::Approx(sigma.quadratic_form_inv(xb)));
  auto wa = walk_c(sigma, xa, 1e-12), wb = walk_c(sigma, xb, 1e-12);
  REQUIRE(wa.value == Catch::Approx(wb.value).epsilon(1e-12));
}

TEST_CASE("very large radii stay on the asymptotic curve", "[gausswalk]") {
  // exercises the underflow-skip of early summands (q / 2n > 700 region)
  auto id5 = DiagonalCovariance::identity(5);
  std::vector<double> x = {1000.0, 0, 0, 0, 0};
  auto w = walk_c(id5, x, 1e-12);
  REQUIRE(w.converged);
  REQUIRE(std::fabs(w.value / walk_c_asymptotic(id5, x) - 1.0) < 1e-6);
}

TEST_CASE("step density is negligible next to the asymptotic error scale", "[gausswalk]") {
  auto id5 = DiagonalCovariance::identity(5);
  double prev = std::numeric_limits<double>::infinity();
  for (double r : {5.0, 7.0, 9.0, 11.0}) {
    std::vector<double> x = {r, 0, 0, 0, 0};
    double dterm = walk::step_density(id5, x) * std::pow(r, 7.0);
    REQUIRE(dterm < prev);
    prev = dterm;
  }
  REQUIRE(prev < 1e-10);
}
