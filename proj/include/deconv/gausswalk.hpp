#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "deconv/kernel.hpp"
#include "deconv/numerics.hpp"

namespace deconv {
namespace walk {

// Leading amplitude constant Gamma((d-2)/2) / (2 pi^{d/2}).
inline double amplitude_constant(int d) {
  if (d < 3) throw std::invalid_argument("amplitude_constant: need d >= 3");
  return std::tgamma(0.5 * (d - 2)) / (2.0 * std::pow(kPi, 0.5 * d));
}

// Gaussian step density D(x) = (2 pi)^{-d/2} det(S)^{-1/2} exp(-x.S^{-1}x/2).
inline double step_density(const DiagonalCovariance& sigma, std::span<const double> x) {
  const int d = sigma.dim();
  if (d < 3) throw std::invalid_argument("step_density: dimension must be >= 3");
  double q = sigma.quadratic_form_inv(x);
  return std::pow(kTwoPi, -0.5 * d) / std::sqrt(sigma.det()) * std::exp(-0.5 * q);
}

struct WalkValue {
  double value = 0.0;
  double tail_bound = 0.0;  // bound on |truncated sum - full sum| (same prefactor units)
  std::int64_t terms = 0;
  bool converged = true;
};

namespace detail {

// phi(n) = n^{-d/2} exp(-q / (2n)) and its first/third log-derivative factors.
struct SummandDerivs {
  double f, f1, f3;
};

inline SummandDerivs phi_derivs(double n, double hd, double q) {
  double f = std::pow(n, -hd) * std::exp(-0.5 * q / n);
  double A = -hd / n + 0.5 * q / (n * n);          // (ln f)'
  double A1 = hd / (n * n) - q / (n * n * n);      // (ln f)''
  double A2 = -2.0 * hd / (n * n * n) + 3.0 * q / (n * n * n * n);
  double f1 = f * A;
  double f2 = f * (A * A + A1);
  double f3 = f2 * A + 2.0 * f1 * A1 + f * A2;     // f''' = (f'' A + 2 f' A' + f A'')
  return {f, f1, f3};
}

// int_a^inf n^{-d/2} exp(-q/(2n)) dn via the incomplete gamma function.
inline double summand_integral_tail(double a, double hd, double q) {
  if (q <= 0.0) return std::pow(a, 1.0 - hd) / (hd - 1.0);
  // substitute u = q/(2n)
  return std::pow(0.5 * q, 1.0 - hd) * lower_gamma(hd - 1.0, 0.5 * q / a);
}

}  // namespace detail

// Sum_{n=n_first}^{infty} n^{-d/2} exp(-q/(2n)): direct summation up to a cut
// plus an Euler-Maclaurin tail. q >= 0, d >= 3. The returned tail_bound covers
// the neglected Euler-Maclaurin remainder.
inline WalkValue walk_series_raw(int d, double q, int n_first, double rel_tol,
                                 std::int64_t n_cap = 100000000LL) {
  const double hd = 0.5 * d;
  WalkValue out;

  // exp underflows to zero below roughly e^{-745}; those terms are genuinely
  // negligible, start past them.
  std::int64_t n_lo = n_first;
  if (q > 0.0) n_lo = std::max<std::int64_t>(n_first, static_cast<std::int64_t>(q / 1480.0));

  std::int64_t n_cut = std::max<std::int64_t>(static_cast<std::int64_t>(8.0 * std::max(q, 1.0)),
                                              10000);
  n_cut = std::min(n_cut, n_cap);

  for (;;) {
    double direct = 0.0;
    for (std::int64_t n = n_lo; n <= n_cut; ++n) {
      direct += std::pow(double(n), -hd) * std::exp(-0.5 * q / double(n));
    }
    double a = double(n_cut + 1);
    auto dv = detail::phi_derivs(a, hd, q);
    double tail = detail::summand_integral_tail(a, hd, q) + 0.5 * dv.f - dv.f1 / 12.0 +
                  dv.f3 / 720.0;
    // Residual after the f''' correction is controlled by the next term's
    // scale; a crude multiple of it is a serviceable bound here.
    double resid = 10.0 * std::fabs(dv.f3) / 720.0 + 1e-16 * (direct + tail);
    out.value = direct + tail;
    out.tail_bound = resid;
    out.terms = n_cut - n_lo + 1;
    if (resid <= rel_tol * std::fabs(out.value) || n_cut >= n_cap) {
      out.converged = resid <= rel_tol * std::fabs(out.value);
      break;
    }
    n_cut = std::min(n_cap, n_cut * 4);
  }
  return out;
}

// Critical two-point function of the Gaussian walk, without the zeroth and
// first steps:
//   C(x) = sum_{n>=2} D^{*n}(x)
//        = (2 pi)^{-d/2} det(S)^{-1/2} sum_{n>=2} n^{-d/2} exp(-x.S^{-1}x/2n).
// include_first_step adds the n = 1 term (used by the Brownian comparison
// series sum_{n>=1} phi_n).
inline WalkValue walk_c(const DiagonalCovariance& sigma, std::span<const double> x,
                        double rel_tol = 1e-10, bool include_first_step = false) {
  const int d = sigma.dim();
  if (d < 3) throw std::invalid_argument("walk_c: dimension must be >= 3");
  double q = sigma.quadratic_form_inv(x);
  double pref = std::pow(kTwoPi, -0.5 * d) / std::sqrt(sigma.det());
  WalkValue s = walk_series_raw(d, q, include_first_step ? 1 : 2, rel_tol);
  s.value *= pref;
  s.tail_bound *= pref;
  return s;
}

// Leading asymptotic form a_d det(S)^{-1/2} (x.S^{-1}x)^{-(d-2)/2}.
inline double walk_c_asymptotic(const DiagonalCovariance& sigma, std::span<const double> x) {
  const int d = sigma.dim();
  if (d < 3) throw std::invalid_argument("walk_c_asymptotic: dimension must be >= 3");
  double q = sigma.quadratic_form_inv(x);
  if (q <= 0.0) throw std::invalid_argument("walk_c_asymptotic: x must be nonzero");
  return amplitude_constant(d) / std::sqrt(sigma.det()) * std::pow(q, -0.5 * (d - 2));
}

// Self-test residual |C(x) - D^{*2}(x) - (D*C)(x)|, the defining recurrence,
// with the convolution evaluated by quadrature (not by the series identity).
//
// In whitened coordinates u = S^{-1/2} z both D and C are radial, so the
// convolution reduces to one dimension with the closed-form angular integral
//   int_{S^{d-1}} e^{r R cos t} dsigma = (2 pi)^{d/2} (r R)^{1 - d/2} I_{d/2-1}(r R):
//   (D*C)(x) = pref e^{-R^2/2} R^{1-d/2} int_0^inf S(r^2) r^{d/2} e^{-r^2/2}
//              I_{d/2-1}(r R) dr,   R = |S^{-1/2} x|,
// where S(q) is the bare series and pref = (2 pi)^{-d/2} det(S)^{-1/2}.
// The r^{2-d} singularity of C at the origin cancels against the volume
// element, so the radial integrand is smooth.
inline double walk_c_recurrence_residual(const DiagonalCovariance& sigma,
                                         std::span<const double> x, double rel_tol = 1e-10) {
  const int d = sigma.dim();
  const double hd = 0.5 * d;
  double R = std::sqrt(sigma.quadratic_form_inv(x));
  double pref = std::pow(kTwoPi, -hd) / std::sqrt(sigma.det());

  auto series = [&](double q) { return walk_series_raw(d, q, 2, rel_tol).value; };

  // I_nu(r R) e^{-(r-R)^2/2} e^{-r R}, assembled without overflowing: the
  // Bessel factor stays below e^{700} on the direct branch and the uniform
  // asymptotic I_nu(z) ~ e^z / sqrt(2 pi z) covers the rest.
  const double nu = hd - 1.0;
  auto bessel_damped = [&](double r) {
    double z = r * R;
    if (z < 600.0) return std::cyl_bessel_i(nu, z) * std::exp(-0.5 * (r * r + R * R));
    return std::exp(-0.5 * sq(r - R)) / std::sqrt(kTwoPi * z);
  };

  double conv;
  double r_hi = R + 10.0;
  int panels = static_cast<int>(r_hi) + 4;
  if (R < 1e-8) {
    conv = pref * std::pow(kTwoPi, -hd) * sphere_area(d) *
           integrate_panels(
               [&](double r) {
                 return series(r * r) * std::pow(r, d - 1) * std::exp(-0.5 * r * r);
               },
               0.0, r_hi, panels, 1e-13);
  } else {
    conv = pref * std::pow(R, 1.0 - hd) *
           integrate_panels(
               [&](double r) {
                 if (r <= 0.0) return 0.0;
                 return series(r * r) * std::pow(r, hd) * bessel_damped(r);
               },
               0.0, r_hi, panels, 1e-13);
  }

  // D^{*2} is the Gaussian with doubled covariance.
  std::vector<double> dbl(sigma.entries());
  for (auto& e : dbl) e *= 2.0;
  double d2 = step_density(DiagonalCovariance(dbl), x);

  double c = walk_c(sigma, x, rel_tol).value;
  return std::fabs(c - d2 - conv);
}

}  // namespace walk
}  // namespace deconv
