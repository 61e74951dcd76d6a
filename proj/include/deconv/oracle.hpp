#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "deconv/fourier_radial.hpp"
#include "deconv/solver.hpp"

namespace deconv {

struct OracleValue {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
};

// ---------------------------------------------------------------------------
// Direct quadrature of Hhat = Jhat ghat / (1 - Jhat) in radial form. Valid
// for isotropic problems; the integrand carries the |k|^{-2} singularity at
// the origin explicitly, handled by geometric panel refinement. This is an
// independent route to H: no walk series, no decomposition, no DFT grid.

inline OracleValue direct_quadrature_radial(const DeconvProblem& p, double r) {
  if (!(p.J.is_isotropic() && p.g.is_isotropic()))
    throw std::invalid_argument("direct quadrature oracle: kernels must be isotropic");
  const int d = p.J.dim();
  double envA = 0.0, envS = 1.0;
  p.fourier_tail_envelope(&envA, &envS);
  double k_cut = std::sqrt(2.0 * std::log(1e12) / std::min(envS,
                           p.J.min_fourier_decay_scale() + p.g.min_fourier_decay_scale())) + 1.0;

  std::vector<double> k(d, 0.0);
  auto F = [&](double rho) {
    k[0] = rho;
    return p.h_hat(k);
  };
  auto t = inverse_fourier_radial(F, d, r, k_cut, 1e-10);
  OracleValue out;
  out.value = t.value;
  out.error = t.quad_error +
              envA * gaussian_radial_tail(d, envS, k_cut) * sphere_area(d) / std::pow(kTwoPi, d);
  out.converged = t.converged;
  return out;
}

// The d = 3 contract from the module interface: adaptive radial-shell
// quadrature of the Fourier integral, restricted to three dimensions.
inline std::vector<OracleValue> solve_direct_quadrature(
    const DeconvProblem& p, const std::vector<std::vector<double>>& points) {
  if (p.J.dim() != 3)
    throw std::invalid_argument("solve_direct_quadrature: only d = 3 is supported");
  std::vector<OracleValue> out(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    double r = std::sqrt(std::inner_product(points[i].begin(), points[i].end(),
                                            points[i].begin(), 0.0));
    out[i] = direct_quadrature_radial(p, r);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Neumann-series oracle: H(x) = sum_{n >= 1} (J^{*n} * g)(x), with the
// convolution powers in closed mixture form. Signed mixtures cancel inside
// each term, so the attainable accuracy degrades as the binomial weights
// grow; the reported error tracks both the truncation tail and that
// cancellation loss.

struct NeumannOptions {
  int n_max = 4000;
  double rel_tol = 1e-9;
};

inline OracleValue neumann_h(const GaussianMixtureKernel& J, const GaussianMixtureKernel& g,
                             std::span<const double> x, const NeumannOptions& opt = {}) {
  const int d = J.dim();
  OracleValue out;
  // summand mode: terms grow until n ~ q/d, then decay like n^{-d/2}
  DiagonalCovariance sigma = derive_sigma(Kernel(J));
  double q = sigma.quadratic_form_inv(x);
  const int n_mode = static_cast<int>(q / d) + 8;

  GaussianMixtureKernel jn = J;  // J^{*n}
  double acc = 0.0, cancel = 0.0;
  int n = 1;
  double term = 0.0;
  for (; n <= opt.n_max; ++n) {
    GaussianMixtureKernel jng = convolve(jn, g);
    term = jng.evaluate(x);
    // cancellation amplitude: the same evaluation with |weights|
    double amp = 0.0;
    for (const auto& c : jng.components()) {
      double qc = c.cov.quadratic_form_inv(x);
      amp += std::fabs(c.weight) * std::pow(kTwoPi, -0.5 * d) / std::sqrt(c.cov.det()) *
             std::exp(-0.5 * qc);
    }
    amp *= jng.scale();
    // rounding: ~4 ulp per component evaluation plus worst-case accumulation
    // across the alternating component sum
    cancel += amp * 1.1e-16 * (4.0 + double(jng.components().size()));
    acc += term;
    // Integral-comparison tail for the n^{-d/2} regime past the mode. Signed
    // mixtures lose digits to cancellation as n grows, so stop as well once
    // further terms cannot improve on the cancellation floor.
    double tail_est = std::fabs(term) * 2.0 * n / std::max(1.0, d - 2.0);
    if (n > n_mode && (tail_est < opt.rel_tol * std::fabs(acc) || cancel > tail_est)) break;
    double wmax = 0.0;
    for (const auto& c : jn.components()) wmax = std::max(wmax, std::fabs(c.weight));
    if (wmax > 1e250) break;  // binomial weight overflow imminent
    if (n < opt.n_max) jn = convolve(jn, J);
  }
  double tail = std::fabs(term) * 2.0 * double(n) / std::max(1.0, double(d) - 2.0);
  out.value = acc;
  out.error = cancel + tail;
  out.converged = n <= opt.n_max && out.error < 0.05 * std::fabs(acc) + 1e-300;
  return out;
}

}  // namespace deconv
