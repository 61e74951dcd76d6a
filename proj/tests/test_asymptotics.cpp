#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "deconv/asymptotics.hpp"

using namespace deconv;

namespace {

std::vector<std::vector<double>> ray(int d, const std::vector<double>& dir,
                                     const std::vector<double>& radii) {
  double n = 0;
  for (double u : dir) n += u * u;
  n = std::sqrt(n);
  std::vector<std::vector<double>> pts;
  for (double r : radii) {
    std::vector<double> x(d);
    for (int i = 0; i < d; ++i) x[i] = r * dir[i] / n;
    pts.push_back(x);
  }
  return pts;
}

}  // namespace

TEST_CASE("prefactor fit approaches the amplitude constant", "[asymptotics]") {
  const int d = 5;
  auto D = GaussianMixtureKernel::standard_gaussian(d);
  GridSpec gs;
  gs.x_max = 126.0;
  auto prob = DeconvProblem::make(D, D, gs);
  std::vector<double> radii = {10, 16, 22, 28, 34, 40};
  auto pts = ray(d, {1, 0, 0, 0, 0}, radii);
  auto res = solve(prob, pts);
  auto fit = fit_direction(res, prob.sigma, {1, 0, 0, 0, 0}, radii);
  REQUIRE(fit.predicted_amplitude ==
          Catch::Approx(walk::amplitude_constant(d)).epsilon(1e-12));
  // series C is exact here; deviation is the lemma's own error term
  REQUIRE(fit.rel_dev_at_largest < 0.01);
  for (double p : fit.prefactors)
    REQUIRE(p == Catch::Approx(walk::amplitude_constant(d)).epsilon(0.01));
  // H ~ r^{-(d-2)}
  REQUIRE(fit.fitted_exponent == Catch::Approx(-3.0).margin(0.05));
  REQUIRE_THROWS_AS(fit_direction(res, prob.sigma, {1, 0, 0, 0, 0}, {10, 16, 22}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(fit_direction(res, prob.sigma, {1, 0, 0, 0, 0}, {11, 16, 22, 28}),
                    std::invalid_argument);  // result does not cover radius 11
}

TEST_CASE("anisotropic problems keep a direction-independent prefactor", "[asymptotics]") {
  const int d = 5;
  auto J = GaussianMixtureKernel::gaussian(DiagonalCovariance({1, 1, 1, 1, 4}));
  auto prob = DeconvProblem::make(J, J);
  std::vector<double> radii = {12, 18, 24, 30};
  std::vector<std::vector<double>> dirs = {{1, 0, 0, 0, 0}, {0, 0, 0, 0, 1}, {1, 1, 1, 1, 1}};
  auto rep = scan_report(prob, dirs, radii);
  REQUIRE(rep.pass);
  REQUIRE(rep.amplitude_spread < 0.02);
  REQUIRE(rep.fits.size() == 3);

  // raw values along the soft axis run 4^{3/2} = 8 times higher
  auto pts = ray(d, {0, 0, 0, 0, 1}, {30.0});
  auto pts1 = ray(d, {1, 0, 0, 0, 0}, {30.0});
  pts.insert(pts.end(), pts1.begin(), pts1.end());
  auto res = solve(prob, pts);
  REQUIRE(res.points[0].h_value / res.points[1].h_value == Catch::Approx(8.0).epsilon(0.02));
}

TEST_CASE("empty direction list produces an empty passing report", "[asymptotics]") {
  auto D = GaussianMixtureKernel::standard_gaussian(3);
  auto prob = DeconvProblem::make(D, D);
  auto rep = scan_report(prob, {}, {10, 12, 14, 16});
  REQUIRE(rep.pass);
  REQUIRE(rep.fits.empty());
}

TEST_CASE("radii in the aliasing zone are dropped with a note", "[asymptotics]") {
  auto D = GaussianMixtureKernel::standard_gaussian(3);
  GridSpec gs;
  gs.x_max = 60.0;
  auto prob = DeconvProblem::make(D, D, gs);
  auto rep = scan_report(prob, {{1, 0, 0}}, {8, 10, 12, 14, 30, 120});
  REQUIRE(rep.pass);
  REQUIRE(rep.dropped_radii.size() == 2);  // 30 and 120 exceed x_max / 3 = 20
  REQUIRE(!rep.note.empty());
}

TEST_CASE("fitted exponents of G and H agree for a mixture g", "[asymptotics]") {
  const int d = 5;
  auto D = GaussianMixtureKernel::standard_gaussian(d);
  auto prob = DeconvProblem::make(D, D);
  std::vector<double> radii = {10, 16, 22, 28};
  auto pts = ray(d, {1, 0, 0, 0, 0}, radii);
  auto res = solve(prob, pts);
  std::vector<double> lr, lh, lg;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    lr.push_back(std::log(radii[i]));
    lh.push_back(std::log(std::fabs(res.points[i].h_value)));
    lg.push_back(std::log(std::fabs(res.points[i].g_value)));
  }
  double eh = fit_line(lr, lh).slope, eg = fit_line(lr, lg).slope;
  REQUIRE(std::fabs(eh - eg) < 0.05);
}
