#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "deconv/kernel.hpp"

using namespace deconv;

namespace {

// Gaussian normalisation (2 pi)^{-d/2} det(S)^{-1/2}, written out so kernel
// evaluation is checked against an independent expression.
double gauss_norm(int d, double s_iso) {
  return std::pow(2.0 * kPi * s_iso, -0.5 * d);
}

RadialTabulatedKernel tabulated_power_tail(int d, double rho) {
  // samples of (1 + r)^{-(d+2+rho)} out to r = 30
  std::vector<double> radii, values;
  for (double r = 0.0; r <= 30.0; r += 0.05) {
    radii.push_back(r);
    values.push_back(std::pow(1.0 + r, -(d + 2.0 + rho)));
  }
  return RadialTabulatedKernel(d, radii, values, rho);
}

}  // namespace

TEST_CASE("gaussian evaluation at the origin and at infinity", "[kernel]") {
  auto g3 = GaussianMixtureKernel::standard_gaussian(3);
  REQUIRE(g3.evaluate(std::vector<double>{0, 0, 0}) ==
          Catch::Approx(gauss_norm(3, 1.0)).epsilon(1e-14));
  REQUIRE(g3.evaluate(std::vector<double>{0, 0, 0}) == Catch::Approx(0.0634936359).epsilon(1e-8));
  REQUIRE(g3.evaluate(std::vector<double>{40, 0, 0}) < 1e-300);

  GaussianMixtureKernel mix(5, {{1.2, DiagonalCovariance::identity(5)},
                                {-0.2, DiagonalCovariance::isotropic(5, 2.0)}});
  double expected = 1.2 * gauss_norm(5, 1.0) - 0.2 * gauss_norm(5, 2.0);
  REQUIRE(mix.evaluate(std::vector<double>(5, 0.0)) == Catch::Approx(expected).epsilon(1e-14));
}

TEST_CASE("gaussian fourier transform closed forms", "[kernel]") {
  auto g3 = GaussianMixtureKernel::standard_gaussian(3);
  REQUIRE(g3.fourier(std::vector<double>{0, 0, 0}) == 1.0);
  REQUIRE(g3.fourier(std::vector<double>{1, 0, 0}) ==
          Catch::Approx(std::exp(-0.5)).epsilon(1e-14));
  GaussianMixtureKernel mix(4, {{1.2, DiagonalCovariance::identity(4)},
                                {-0.2, DiagonalCovariance::identity(4)}});
  REQUIRE(mix.fourier(std::vector<double>(4, 0.0)) == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("dimension mismatch is rejected", "[kernel]") {
  auto g3 = GaussianMixtureKernel::standard_gaussian(3);
  REQUIRE_THROWS_AS(g3.evaluate(std::vector<double>{0, 0}), std::invalid_argument);
  REQUIRE_THROWS_AS(g3.fourier(std::vector<double>(4, 0.0)), std::invalid_argument);
}

TEST_CASE("convolution adds covariances and multiplies weights", "[kernel]") {
  auto g = GaussianMixtureKernel::standard_gaussian(3);
  auto c = convolve(g, g);
  REQUIRE(c.components().size() == 1);
  REQUIRE(c.components()[0].cov.entry(0) == Catch::Approx(2.0));
  std::vector<double> x = {0.7, -0.3, 1.1};
  REQUIRE(c.evaluate(x) ==
          Catch::Approx(GaussianMixtureKernel::gaussian(DiagonalCovariance::isotropic(3, 2.0))
                            .evaluate(x))
              .epsilon(1e-14));

  GaussianMixtureKernel h(3, {{0.5, DiagonalCovariance::identity(3)}});
  auto hh = convolve(h, h);
  REQUIRE(hh.components().size() == 1);
  REQUIRE(hh.components()[0].weight == Catch::Approx(0.25));
  REQUIRE(hh.components()[0].cov.entry(2) == Catch::Approx(2.0));
}

TEST_CASE("convolving with a near-delta reproduces the other factor", "[kernel]") {
  const int d = 3;
  GaussianMixtureKernel delta_like(d, {{1.0, DiagonalCovariance::isotropic(d, 1e-6)}});
  auto g = GaussianMixtureKernel::standard_gaussian(d);
  auto c = convolve(delta_like, g);
  std::vector<double> zero(d, 0.0);
  REQUIRE(std::fabs(c.evaluate(zero) / g.evaluate(zero) - 1.0) < 1e-3);
}

TEST_CASE("fourier-convolution duality at random wave vectors", "[kernel]") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0), w(-1.0, 1.5), s(0.3, 2.5);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 3 + (trial % 3);
    GaussianMixtureKernel a(d, {{w(rng), DiagonalCovariance::isotropic(d, s(rng))},
                                {w(rng), DiagonalCovariance::isotropic(d, s(rng))}});
    std::vector<double> ent(d);
    for (auto& e : ent) e = s(rng);
    GaussianMixtureKernel b(d, {{w(rng), DiagonalCovariance(ent)}});
    auto c = convolve(a, b);
    std::vector<double> k(d);
    for (auto& ki : k) ki = u(rng);
    double lhs = c.fourier(k), rhs = a.fourier(k) * b.fourier(k);
    REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-12).margin(1e-14));
  }
}

TEST_CASE("kernels are even", "[kernel]") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  GaussianMixtureKernel mix(4, {{1.25, DiagonalCovariance::identity(4)},
                                {-0.25, DiagonalCovariance::isotropic(4, 2.0)}});
  auto tab = tabulated_power_tail(4, 3.0);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> x(4), mx(4);
    for (int i = 0; i < 4; ++i) {
      x[i] = u(rng);
      mx[i] = -x[i];
    }
    REQUIRE(mix.evaluate(x) == mix.evaluate(mx));
    REQUIRE(tab.evaluate(x) == tab.evaluate(mx));
  }
}

TEST_CASE("mass consistency: fourier at zero equals the integral", "[kernel]") {
  GaussianMixtureKernel mix(3, {{0.7, DiagonalCovariance::isotropic(3, 1.3)},
                                {0.3, DiagonalCovariance::isotropic(3, 0.4)}});
  REQUIRE(mix.fourier(std::vector<double>(3, 0.0)) == Catch::Approx(mix.mass()).epsilon(1e-14));
  // nonnegative kernel: the L1 norm coincides with the mass
  auto m = moment(Kernel(mix), 0.0, 1.0);
  REQUIRE(m.finite);
  REQUIRE(m.value == Catch::Approx(mix.mass()).epsilon(1e-9));
  // tabulated: fourier(0) vs radial quadrature mass
  auto tab = tabulated_power_tail(3, 4.0);
  REQUIRE(tab.fourier(std::vector<double>(3, 0.0)) == Catch::Approx(tab.mass()).epsilon(1e-9));
}

TEST_CASE("gaussian moments: closed forms", "[kernel]") {
  auto g3 = Kernel(GaussianMixtureKernel::standard_gaussian(3));
  auto m2 = moment(g3, 2.0, 1.0);
  REQUIRE(m2.finite);
  REQUIRE(m2.value == Catch::Approx(3.0).epsilon(1e-9));  // trace of the covariance
  auto m0 = moment(g3, 0.0, 1.0);
  REQUIRE(m0.value == Catch::Approx(1.0).epsilon(1e-10));
  // ||N||_2 = (4 pi)^{-d/4}
  auto l2 = moment(g3, 0.0, 2.0);
  REQUIRE(l2.value == Catch::Approx(std::pow(4.0 * kPi, -0.75)).epsilon(1e-9));
}

TEST_CASE("heavy-tail tabulated kernel has divergent 2+eps moment", "[kernel]") {
  const int d = 5;
  auto tab = tabulated_power_tail(d, -1.0);  // decay (1+r)^{-(d+1)}
  auto m = moment(Kernel(tab), 2.5, 1.0);
  REQUIRE_FALSE(m.finite);
  REQUIRE(std::isinf(m.value));
  // order-2 moment diverges too ((1+r)^{-(d+1)} r^{d+1} ~ 1)
  REQUIRE_FALSE(moment(Kernel(tab), 2.0, 1.0).finite);
  // mass is fine
  REQUIRE(moment(Kernel(tab), 0.0, 1.0).finite);
}

TEST_CASE("moment monotonicity: finite at order a implies finite below", "[kernel]") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> urho(-1.5, 6.0);
  for (int t = 0; t < 25; ++t) {
    const int d = 3 + (t % 3);
    auto tab = tabulated_power_tail(d, urho(rng));
    double a = 4.0, b = 1.0 + 2.0 * (t % 4) / 3.0;  // b <= a
    auto ma = moment(Kernel(tab), a, 1.0);
    if (ma.finite) REQUIRE(moment(Kernel(tab), b, 1.0).finite);
  }
}

TEST_CASE("anisotropic moment bound agrees with the exact isotropic value", "[kernel]") {
  // the bound path reduces to the closed form when all entries coincide
  const int d = 4;
  GaussianMixtureKernel iso(d, {{1.0, DiagonalCovariance::isotropic(d, 1.7)}});
  std::vector<double> ent = {1.7, 1.7, 1.7, 1.7 * (1 + 1e-13)};  // trips the anisotropic path
  GaussianMixtureKernel aniso(d, {{1.0, DiagonalCovariance(ent)}});
  for (double a : {0.0, 2.0, 2.5}) {
    for (double p : {1.0, 2.0}) {
      auto exact = moment(Kernel(iso), a, p);
      auto bound = moment(Kernel(aniso), a, p);
      REQUIRE(bound.value >= exact.value * (1 - 1e-9));
      REQUIRE(bound.value == Catch::Approx(exact.value).epsilon(1e-6));
    }
  }
}

TEST_CASE("tabulated kernel interpolation and tail model", "[kernel]") {
  RadialTabulatedKernel tab(3, {0.0, 1.0, 2.0}, {1.0, 0.5, 0.25}, 2.0);
  REQUIRE(tab.evaluate_radial(0.5) == Catch::Approx(0.75));
  REQUIRE(tab.evaluate_radial(1.5) == Catch::Approx(0.375));
  // beyond the grid: value continues with the declared power law
  double e = 3.0 + 2.0 + 2.0;
  REQUIRE(tab.evaluate_radial(5.0) ==
          Catch::Approx(0.25 * std::pow(3.0, e) * std::pow(6.0, -e)).epsilon(1e-12));
  REQUIRE_THROWS_AS(RadialTabulatedKernel(3, {0.0, 0.0}, {1.0, 1.0}, 2.0), std::invalid_argument);
  REQUIRE_THROWS_AS(RadialTabulatedKernel(2, {0.0, 1.0}, {1.0, 1.0}, 2.0), std::invalid_argument);
}

TEST_CASE("tabulated radial fourier matches the gaussian closed form", "[kernel]") {
  // tabulate a standard gaussian and compare hhat(k) with exp(-k^2/2)
  const int d = 3;
  std::vector<double> radii, values;
  for (double r = 0.0; r <= 9.0; r += 0.01) {
    radii.push_back(r);
    values.push_back(std::pow(kTwoPi, -1.5) * std::exp(-0.5 * r * r));
  }
  RadialTabulatedKernel tab(d, radii, values, 8.0);
  for (double k : {0.0, 0.5, 1.0, 2.0}) {
    auto f = tab.fourier_radial(k);
    REQUIRE(f.value == Catch::Approx(std::exp(-0.5 * k * k)).epsilon(2e-4).margin(1e-6));
  }
}
