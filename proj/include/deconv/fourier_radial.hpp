#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "deconv/numerics.hpp"

namespace deconv {

// Bessel J_nu with stable half-integer forms for the dimensions we hit most.
inline double bessel_j_radial(double nu, double z) {
  if (z <= 0.0) return nu == 0.0 ? 1.0 : 0.0;
  if (nu == 0.5) return std::sqrt(2.0 / (kPi * z)) * std::sin(z);
  if (nu == 1.5) {
    double core;
    if (z < 0.1) {
      // sin z / z - cos z, series to avoid cancellation
      double z2 = z * z;
      core = z2 / 3.0 * (1.0 - z2 / 10.0 * (1.0 - z2 / 28.0 * (1.0 - z2 / 54.0)));
    } else {
      core = std::sin(z) / z - std::cos(z);
    }
    return std::sqrt(2.0 / (kPi * z)) * core;
  }
  return std::cyl_bessel_j(nu, z);
}

struct RadialTransformResult {
  double value = 0.0;
  double quad_error = 0.0;  // panel refinement estimate (tail handled by caller)
  bool converged = true;
};

// Inverse Fourier transform of a radial function F(|k|) at radius r:
//   (2 pi)^{-d} int_{R^d} F(|k|) e^{-ik.x} dk
//     = (2 pi)^{-d/2} r^{1-d/2} int_0^kcut F(rho) J_{d/2-1}(rho r) rho^{d/2} drho
// truncated at kcut. Panels are sized by the oscillation and refined
// geometrically towards rho = 0 where F may vary fastest.
inline RadialTransformResult inverse_fourier_radial(const std::function<double(double)>& F, int d,
                                                    double r, double k_cut,
                                                    double rel_tol = 1e-9) {
  static const QuadratureRule gl16 = gauss_legendre(16);
  static const QuadratureRule gl32 = gauss_legendre(32);

  std::vector<double> bp;
  bp.push_back(0.0);
  // Geometric refinement towards zero. The floor stays well above the
  // scale where 1 - exp(-k^2 ...) factors in F lose all precision.
  for (double e = k_cut * std::pow(2.0, -14); e < k_cut * 0.0625; e *= 2.0) bp.push_back(e);
  // oscillation-resolving panels
  double step = (r > 1e-12) ? std::min(kPi / (2.0 * r), k_cut / 8.0) : k_cut / 32.0;
  for (double e = k_cut * 0.0625; e < k_cut; e += step) bp.push_back(e);
  bp.push_back(k_cut);
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

  const double nu = 0.5 * d - 1.0;
  std::function<double(double)> integrand;
  double prefactor;
  if (r > 1e-12) {
    integrand = [&](double rho) {
      return F(rho) * bessel_j_radial(nu, rho * r) * std::pow(rho, 0.5 * d);
    };
    prefactor = std::pow(kTwoPi, -0.5 * d) * std::pow(r, 1.0 - 0.5 * d);
  } else {
    integrand = [&](double rho) { return F(rho) * std::pow(rho, d - 1); };
    prefactor = std::pow(kTwoPi, -d) * sphere_area(d);
  }

  double coarse = 0.0, fine = 0.0;
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    coarse += gl_integrate(integrand, bp[i], bp[i + 1], gl16);
    fine += gl_integrate(integrand, bp[i], bp[i + 1], gl32);
  }

  RadialTransformResult out;
  out.value = prefactor * fine;
  out.quad_error = std::fabs(prefactor) * std::fabs(fine - coarse);
  out.converged = out.quad_error <= rel_tol * std::fabs(out.value) + 1e-300;
  return out;
}

}  // namespace deconv
