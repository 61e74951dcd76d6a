#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "deconv/numerics.hpp"

using namespace deconv;

TEST_CASE("lower incomplete gamma matches the erf closed form at s = 3/2", "[numerics]") {
  // gamma(3/2, x) = sqrt(pi)/2 erf(sqrt(x)) - sqrt(x) e^{-x}; the reference
  // itself cancels at tiny x, hence the absolute margin.
  for (double x : {1e-6, 0.01, 0.3, 1.0, 2.3, 7.0, 30.0, 200.0}) {
    double ref = std::sqrt(kPi) / 2.0 * std::erf(std::sqrt(x)) - std::sqrt(x) * std::exp(-x);
    REQUIRE(lower_gamma(1.5, x) == Catch::Approx(ref).epsilon(1e-13).margin(1e-17));
  }
}

TEST_CASE("incomplete gamma halves sum to Gamma", "[numerics]") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> us(0.3, 4.0), ux(0.01, 20.0);
  for (int i = 0; i < 200; ++i) {
    double s = us(rng), x = ux(rng);
    REQUIRE(lower_gamma(s, x) + upper_gamma(s, x) ==
            Catch::Approx(std::tgamma(s)).epsilon(1e-12));
  }
}

TEST_CASE("gaussian radial tail matches quadrature", "[numerics]") {
  // int_K^inf e^{-s r^2/2} r^{d-1} dr
  for (int d : {3, 5}) {
    for (double K : {0.5, 2.0}) {
      double s = 1.3;
      double quad = adaptive_simpson(
          [&](double r) { return std::exp(-0.5 * s * r * r) * std::pow(r, d - 1); }, K, K + 30.0,
          1e-14);
      REQUIRE(gaussian_radial_tail(d, s, K) == Catch::Approx(quad).epsilon(1e-10));
    }
  }
}

TEST_CASE("smoothstep window is flat inside, zero outside, monotone between", "[numerics]") {
  for (int order : {3, 5, 9}) {
    REQUIRE(radial_window(0.2, 1.0, 2.0, order) == 1.0);
    REQUIRE(radial_window(1.0, 1.0, 2.0, order) == 1.0);
    REQUIRE(radial_window(2.0, 1.0, 2.0, order) == 0.0);
    REQUIRE(radial_window(5.0, 1.0, 2.0, order) == 0.0);
    double prev = 1.0;
    for (double r = 1.0; r <= 2.0; r += 0.01) {
      double w = radial_window(r, 1.0, 2.0, order);
      REQUIRE(w <= prev + 1e-12);
      prev = w;
    }
  }
}

TEST_CASE("line fit recovers an exact line", "[numerics]") {
  std::vector<double> x = {1.0, 2.0, 3.5, 7.0, 9.0}, y;
  for (double xi : x) y.push_back(-2.5 * xi + 0.75);
  auto f = fit_line(x, y);
  REQUIRE(f.slope == Catch::Approx(-2.5).epsilon(1e-12));
  REQUIRE(f.intercept == Catch::Approx(0.75).epsilon(1e-12));
  REQUIRE(f.slope_se == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("gauss-legendre integrates high-degree polynomials", "[numerics]") {
  auto gl = gauss_legendre(16);
  // int_{-1}^{1} x^{2m} dx = 2/(2m+1), exact through degree 31
  for (int m : {0, 3, 9, 15}) {
    double acc = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i)
      acc += gl.weights[i] * std::pow(gl.nodes[i], 2 * m);
    REQUIRE(acc == Catch::Approx(2.0 / (2 * m + 1)).epsilon(1e-12));
  }
}

TEST_CASE("gauss-hermite reproduces normal moments", "[numerics]") {
  auto gh = gauss_hermite_prob(20);
  double m0 = 0, m2 = 0, m4 = 0, m6 = 0;
  for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
    double z = gh.nodes[i], w = gh.weights[i];
    m0 += w;
    m2 += w * z * z;
    m4 += w * z * z * z * z;
    m6 += w * std::pow(z, 6);
  }
  REQUIRE(m0 == Catch::Approx(1.0).epsilon(1e-13));
  REQUIRE(m2 == Catch::Approx(1.0).epsilon(1e-12));
  REQUIRE(m4 == Catch::Approx(3.0).epsilon(1e-12));
  REQUIRE(m6 == Catch::Approx(15.0).epsilon(1e-11));
}

TEST_CASE("panel integration catches a narrow bump far from the endpoints", "[numerics]") {
  // plain adaptive refinement would see zeros at the first probes here
  auto bump = [](double r) { return std::exp(-0.5 * sq((r - 3.0) / 0.2)); };
  double val = integrate_panels(bump, 0.0, 100.0, 128, 1e-12);
  REQUIRE(val == Catch::Approx(0.2 * std::sqrt(kTwoPi)).epsilon(1e-9));
}

TEST_CASE("pairwise sum is exact on a constant vector", "[numerics]") {
  std::vector<double> v(1023, 0.125);
  REQUIRE(pairwise_sum(v) == Catch::Approx(1023 * 0.125).epsilon(1e-15));
}
