#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace deconv {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

inline double sq(double x) { return x * x; }

// Surface area of the unit sphere S^{d-1}.
inline double sphere_area(int d) {
  return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
}

// Volume of the d-ball of radius r.
inline double ball_volume(int d, double r) {
  return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0) * std::pow(r, d);
}

// ---------------------------------------------------------------------------
// Summation helpers

// Pairwise (cascade) sum; used wherever a reduction must not depend on the
// number of workers that produced the partial terms.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  std::size_t h = v.size() / 2;
  return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

// ---------------------------------------------------------------------------
// Least squares line fit (used for log-log exponent fits)

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;  // standard error of the slope
  std::size_t n = 0;
};

inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need >= 2 matching points");
  std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += sq(x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LinearFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) ss_res += sq(y[i] - (f.intercept + f.slope * x[i]));
  if (n > 2) f.slope_se = std::sqrt(ss_res / double(n - 2) / sxx);
  return f;
}

// ---------------------------------------------------------------------------
// Smoothstep taper windows

// Generalised smoothstep S_N on [0,1]: polynomial of degree 2N+1 with N
// vanishing derivatives at both ends. S_N(0)=0, S_N(1)=1. The binomial sum
// alternates, so it is evaluated on u <= 1/2 only (powers keep the terms
// tame there) and reflected through S_N(u) + S_N(1-u) = 1 otherwise.
inline double smoothstep(int order, double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  if (u > 0.5) return 1.0 - smoothstep(order, 1.0 - u);
  double acc = 0.0;
  auto binom = [](double n, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= (n - i) / (k - i);
    return r;
  };
  for (int k = 0; k <= order; ++k) {
    acc += binom(order + k, k) * binom(2 * order + 1, order - k) * std::pow(-u, k);
  }
  return std::clamp(std::pow(u, order + 1) * acc, 0.0, 1.0);
}

// Radial taper: 1 on [0, r0], smooth rolloff to 0 at r1.
inline double radial_window(double rho, double r0, double r1, int order) {
  if (rho <= r0) return 1.0;
  if (rho >= r1) return 0.0;
  return 1.0 - smoothstep(order, (rho - r0) / (r1 - r0));
}

// ---------------------------------------------------------------------------
// Incomplete gamma functions

namespace detail {

inline double gamma_p_series(double s, double x) {
  double ap = s, sum = 1.0 / s, del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + s * std::log(x) - std::lgamma(s));
}

inline double gamma_q_contfrac(double s, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - s, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -double(i) * (double(i) - s);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + s * std::log(x) - std::lgamma(s)) * h;
}

}  // namespace detail

// Regularised lower incomplete gamma P(s, x) = gamma(s, x) / Gamma(s).
inline double gamma_p(double s, double x) {
  if (s <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_p: need s > 0, x >= 0");
  if (x == 0.0) return 0.0;
  if (x < s + 1.0) return detail::gamma_p_series(s, x);
  return 1.0 - detail::gamma_q_contfrac(s, x);
}

// Lower incomplete gamma(s, x) = int_0^x t^{s-1} e^{-t} dt.
inline double lower_gamma(double s, double x) { return gamma_p(s, x) * std::tgamma(s); }

// Upper incomplete Gamma(s, x) = int_x^infty t^{s-1} e^{-t} dt.
inline double upper_gamma(double s, double x) {
  if (x == 0.0) return std::tgamma(s);
  if (x < s + 1.0) return (1.0 - detail::gamma_p_series(s, x)) * std::tgamma(s);
  return detail::gamma_q_contfrac(s, x) * std::tgamma(s);
}

// int_K^infty e^{-s r^2/2} r^{d-1} dr, the Gaussian radial tail.
inline double gaussian_radial_tail(int d, double s, double K) {
  // substitute u = s r^2 / 2
  double u0 = 0.5 * s * K * K;
  return 0.5 * std::pow(2.0 / s, 0.5 * d) * upper_gamma(0.5 * d, u0);
}

// ---------------------------------------------------------------------------
// Quadrature

namespace detail {
inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-10, int max_depth = 48) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// Adaptive integration seeded with uniform panels, so integrands whose
// support is much narrower than [a, b] are not missed by the first probes.
inline double integrate_panels(const std::function<double(double)>& f, double a, double b,
                               int n_panels, double tol = 1e-12) {
  if (!(b > a)) return 0.0;
  double acc = 0.0, h = (b - a) / n_panels;
  for (int i = 0; i < n_panels; ++i)
    acc += adaptive_simpson(f, a + i * h, a + (i + 1) * h, tol / n_panels);
  return acc;
}

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

// Gauss-Legendre nodes/weights by Newton iteration on P_n.
inline QuadratureRule gauss_legendre(int n) {
  QuadratureRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = r.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
  return r;
}

// Gauss-Hermite rule for E[f(Z)], Z ~ N(0,1): returns nodes z_i and weights
// summing to 1 (probabilists' normalisation).
inline QuadratureRule gauss_hermite_prob(int n) {
  // Physicists' rule for weight e^{-t^2}, then rescale z = sqrt(2) t,
  // w -> w / sqrt(pi).
  QuadratureRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const double pim4 = 0.7511255444649425;  // pi^{-1/4}
  int m = (n + 1) / 2;
  double x = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0)
      x = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    else if (i == 1)
      x -= 1.14 * std::pow(n, 0.426) / x;
    else if (i == 2)
      x = 1.86 * x - 0.86 * r.nodes[0];
    else if (i == 3)
      x = 1.91 * x - 0.91 * r.nodes[1];
    else
      x = 2.0 * x - r.nodes[i - 2];
    double pp = 0.0;
    for (int it = 0; it < 200; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = x * std::sqrt(2.0 / (j + 1.0)) * p2 - std::sqrt(double(j) / (j + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      double dx = p1 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-14) break;
    }
    r.nodes[i] = x;  // store physicists' node temporarily (descending)
    r.nodes[n - 1 - i] = -x;
    double w = 2.0 / (pp * pp);
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  double wsum = 0.0;
  for (int i = 0; i < n; ++i) {
    r.nodes[i] *= std::sqrt(2.0);
    wsum += r.weights[i];
  }
  for (auto& w : r.weights) w /= wsum;
  return r;
}

// Integrates f over [a, b] with a fixed Gauss-Legendre rule.
inline double gl_integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureRule& gl) {
  double c = 0.5 * (a + b), h = 0.5 * (b - a), s = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i) s += gl.weights[i] * f(c + h * gl.nodes[i]);
  return s * h;
}

}  // namespace deconv
