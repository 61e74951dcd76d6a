#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "deconv/numerics.hpp"

namespace deconv {

// ---------------------------------------------------------------------------
// DiagonalCovariance: positive-definite diagonal matrix.

class DiagonalCovariance {
 public:
  explicit DiagonalCovariance(std::vector<double> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw std::invalid_argument("DiagonalCovariance: empty");
    for (double e : entries_)
      if (!(e > 0.0) || !std::isfinite(e))
        throw std::invalid_argument("DiagonalCovariance: entries must be positive finite");
  }

  static DiagonalCovariance identity(int d) {
    return DiagonalCovariance(std::vector<double>(d, 1.0));
  }
  static DiagonalCovariance isotropic(int d, double s) {
    return DiagonalCovariance(std::vector<double>(d, s));
  }

  int dim() const { return static_cast<int>(entries_.size()); }
  double entry(int i) const { return entries_[i]; }
  const std::vector<double>& entries() const { return entries_; }

  double det() const {
    double p = 1.0;
    for (double e : entries_) p *= e;
    return p;
  }
  double trace() const {
    double t = 0.0;
    for (double e : entries_) t += e;
    return t;
  }
  double min_entry() const { return *std::min_element(entries_.begin(), entries_.end()); }
  double max_entry() const { return *std::max_element(entries_.begin(), entries_.end()); }

  // x . Sigma^{-1} x
  double quadratic_form_inv(std::span<const double> x) const {
    check_dim(x.size());
    double q = 0.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) q += x[i] * x[i] / entries_[i];
    return q;
  }

  // k . Sigma k
  double quadratic_form(std::span<const double> k) const {
    check_dim(k.size());
    double q = 0.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) q += k[i] * k[i] * entries_[i];
    return q;
  }

  bool is_isotropic(double rel_tol = 1e-12) const {
    for (double e : entries_)
      if (std::fabs(e - entries_[0]) > rel_tol * entries_[0]) return false;
    return true;
  }

  bool equals(const DiagonalCovariance& o, double rel_tol) const {
    if (o.dim() != dim()) return false;
    for (int i = 0; i < dim(); ++i)
      if (std::fabs(entries_[i] - o.entries_[i]) > rel_tol * std::fabs(entries_[i])) return false;
    return true;
  }

 private:
  void check_dim(std::size_t n) const {
    if (static_cast<int>(n) != dim())
      throw std::invalid_argument("DiagonalCovariance: dimension mismatch");
  }
  std::vector<double> entries_;
};

// ---------------------------------------------------------------------------
// Gaussian mixture kernel: h(x) = scale * sum_i w_i N(0, S_i)(x), with
// diagonal S_i. Even by construction; closed under convolution; exact
// Fourier transform and moments.

struct GaussianComponent {
  double weight;
  DiagonalCovariance cov;
};

class GaussianMixtureKernel {
 public:
  GaussianMixtureKernel(int dim, std::vector<GaussianComponent> comps, double scale = 1.0)
      : dim_(dim), scale_(scale), comps_(std::move(comps)) {
    if (dim_ < 3) throw std::invalid_argument("GaussianMixtureKernel: dimension must be >= 3");
    if (comps_.empty()) throw std::invalid_argument("GaussianMixtureKernel: no components");
    if (!(scale_ > 0.0)) throw std::invalid_argument("GaussianMixtureKernel: scale must be > 0");
    for (const auto& c : comps_) {
      if (c.cov.dim() != dim_)
        throw std::invalid_argument("GaussianMixtureKernel: component dimension mismatch");
      if (!std::isfinite(c.weight))
        throw std::invalid_argument("GaussianMixtureKernel: non-finite weight");
    }
  }

  static GaussianMixtureKernel standard_gaussian(int d) {
    return GaussianMixtureKernel(d, {{1.0, DiagonalCovariance::identity(d)}});
  }
  static GaussianMixtureKernel gaussian(const DiagonalCovariance& cov, double weight = 1.0) {
    return GaussianMixtureKernel(cov.dim(), {{weight, cov}});
  }

  int dim() const { return dim_; }
  double scale() const { return scale_; }
  const std::vector<GaussianComponent>& components() const { return comps_; }

  double evaluate(std::span<const double> x) const {
    check_dim(x.size());
    double v = 0.0;
    for (const auto& c : comps_) {
      double q = c.cov.quadratic_form_inv(x);
      v += c.weight * std::pow(kTwoPi, -0.5 * dim_) / std::sqrt(c.cov.det()) * std::exp(-0.5 * q);
    }
    return scale_ * v;
  }

  // hhat(k) = integral h(x) e^{ik.x} dx = scale * sum_i w_i exp(-k.S_i k / 2)
  double fourier(std::span<const double> k) const {
    check_dim(k.size());
    double v = 0.0;
    for (const auto& c : comps_) v += c.weight * std::exp(-0.5 * c.cov.quadratic_form(k));
    return scale_ * v;
  }

  // Same transform evaluated from per-axis squares k_i^2 (hot-loop variant).
  double fourier_from_squares(std::span<const double> k2) const {
    double v = 0.0;
    for (const auto& c : comps_) {
      double q = 0.0;
      for (int i = 0; i < dim_; ++i) q += k2[i] * c.cov.entry(i);
      v += c.weight * std::exp(-0.5 * q);
    }
    return scale_ * v;
  }

  // integral of h = hhat(0)
  double mass() const {
    double w = 0.0;
    for (const auto& c : comps_) w += c.weight;
    return scale_ * w;
  }

  // integral x_i^2 h(x) dx (signed)
  double second_moment(int axis) const {
    double s = 0.0;
    for (const auto& c : comps_) s += c.weight * c.cov.entry(axis);
    return scale_ * s;
  }

  GaussianMixtureKernel scaled(double c) const {
    if (!(c > 0.0)) {
      // fold the sign into weights so scale stays positive
      std::vector<GaussianComponent> comps = comps_;
      for (auto& g : comps) g.weight *= c * scale_;
      return GaussianMixtureKernel(dim_, std::move(comps), 1.0);
    }
    return GaussianMixtureKernel(dim_, comps_, scale_ * c);
  }

  bool is_isotropic() const {
    for (const auto& c : comps_)
      if (!c.cov.is_isotropic()) return false;
    return true;
  }

  // Smallest per-component covariance scale; controls the Fourier-tail decay
  // envelope |hhat(k)| <= (sum |w_i|) exp(-s_min |k|^2 / 2).
  double min_fourier_decay_scale() const {
    double s = std::numeric_limits<double>::infinity();
    for (const auto& c : comps_) s = std::min(s, c.cov.min_entry());
    return s;
  }
  double abs_weight_sum() const {
    double a = 0.0;
    for (const auto& c : comps_) a += std::fabs(c.weight);
    return scale_ * a;
  }

 private:
  void check_dim(std::size_t n) const {
    if (static_cast<int>(n) != dim_)
      throw std::invalid_argument("GaussianMixtureKernel: dimension mismatch");
  }
  int dim_;
  double scale_;
  std::vector<GaussianComponent> comps_;
};

// Convolution of mixtures: weights multiply, covariances add. Components
// whose covariances agree within rel 1e-12 are merged to keep repeated
// convolutions from blowing up the component count.
inline GaussianMixtureKernel convolve(const GaussianMixtureKernel& a,
                                      const GaussianMixtureKernel& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("convolve: dimension mismatch");
  constexpr double kMergeTol = 1e-12;
  const int d = a.dim();
  std::vector<GaussianComponent> prod;
  prod.reserve(a.components().size() * b.components().size());
  for (const auto& ca : a.components()) {
    for (const auto& cb : b.components()) {
      std::vector<double> cov(d);
      for (int i = 0; i < d; ++i) cov[i] = ca.cov.entry(i) + cb.cov.entry(i);
      prod.push_back({ca.weight * cb.weight, DiagonalCovariance(std::move(cov))});
    }
  }
  // Sort lexicographically by covariance so equal-within-tolerance entries
  // land adjacent, then merge neighbours; keeps repeated convolution from
  // blowing up the component count.
  std::sort(prod.begin(), prod.end(), [d](const GaussianComponent& l, const GaussianComponent& r) {
    for (int i = 0; i < d; ++i) {
      if (l.cov.entry(i) != r.cov.entry(i)) return l.cov.entry(i) < r.cov.entry(i);
    }
    return false;
  });
  std::vector<GaussianComponent> out;
  out.reserve(prod.size());
  for (auto& c : prod) {
    if (!out.empty() && out.back().cov.equals(c.cov, kMergeTol)) {
      out.back().weight += c.weight;
    } else {
      out.push_back(std::move(c));
    }
  }
  return GaussianMixtureKernel(d, std::move(out), a.scale() * b.scale());
}

// ---------------------------------------------------------------------------
// Radial tabulated kernel: samples h(r_i), interpolation in between, and a
// declared power-law tail |h(x)| <= C (1+|x|)^{-(d+2+rho)} past the last
// radius. Even by construction.

class RadialTabulatedKernel {
 public:
  RadialTabulatedKernel(int dim, std::vector<double> radii, std::vector<double> values,
                        double tail_rho, int interp_order = 1)
      : dim_(dim),
        radii_(std::move(radii)),
        values_(std::move(values)),
        tail_rho_(tail_rho),
        interp_order_(interp_order) {
    if (dim_ < 3) throw std::invalid_argument("RadialTabulatedKernel: dimension must be >= 3");
    if (radii_.size() != values_.size() || radii_.size() < 2)
      throw std::invalid_argument("RadialTabulatedKernel: need >= 2 matching samples");
    for (std::size_t i = 1; i < radii_.size(); ++i)
      if (!(radii_[i] > radii_[i - 1]))
        throw std::invalid_argument("RadialTabulatedKernel: radii must be increasing");
    if (radii_.front() < 0.0)
      throw std::invalid_argument("RadialTabulatedKernel: radii must be >= 0");
    if (interp_order_ != 1 && interp_order_ != 3)
      throw std::invalid_argument("RadialTabulatedKernel: interpolation order must be 1 or 3");
    // Tail model anchored at the last grid point.
    tail_coeff_ = values_.back() * std::pow(1.0 + radii_.back(), tail_exponent());
  }

  int dim() const { return dim_; }
  double tail_rho() const { return tail_rho_; }
  double tail_exponent() const { return dim_ + 2.0 + tail_rho_; }
  const std::vector<double>& radii() const { return radii_; }
  const std::vector<double>& values() const { return values_; }

  double evaluate_radial(double r) const {
    if (r < 0.0) r = -r;
    if (r <= radii_.front()) return values_.front();
    if (r >= radii_.back()) return tail_coeff_ * std::pow(1.0 + r, -tail_exponent());
    auto it = std::upper_bound(radii_.begin(), radii_.end(), r);
    std::size_t j = static_cast<std::size_t>(it - radii_.begin());
    if (interp_order_ == 1) return lerp_segment(j - 1, r);
    return catmull_rom(j - 1, r);
  }

  double evaluate(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim_)
      throw std::invalid_argument("RadialTabulatedKernel: dimension mismatch");
    double r2 = 0.0;
    for (double xi : x) r2 += xi * xi;
    return evaluate_radial(std::sqrt(r2));
  }

  struct FourierResult {
    double value = 0.0;
    double residual = 0.0;  // estimated truncation/quadrature error
    bool converged = true;
  };

  // hhat(k) via the radial (Hankel-type) reduction
  //   hhat(k) = (2 pi)^{d/2} |k|^{1-d/2} int_0^inf h(r) J_{d/2-1}(|k| r) r^{d/2} dr.
  FourierResult fourier_radial(double kmag) const {
    FourierResult out;
    const double nu = 0.5 * dim_ - 1.0;
    const double R = radii_.back();
    if (kmag < 1e-12) {
      // hhat(0) = S_{d-1} int h(r) r^{d-1} dr
      double grid = integrate_panels(
          [&](double r) { return evaluate_radial(r) * std::pow(r, dim_ - 1); }, 0.0, R, 64,
          1e-12);
      auto tail = tail_power_integral(dim_ - 1.0, 1.0);
      out.value = sphere_area(dim_) * (grid + tail.first);
      out.residual = sphere_area(dim_) * tail.second;
      return out;
    }
    auto integrand = [&](double r) {
      return evaluate_radial(r) * std::cyl_bessel_j(nu, kmag * r) * std::pow(r, 0.5 * dim_);
    };
    // Panels no longer than half a Bessel period keep the oscillation resolved.
    const double panel = std::min(kPi / (2.0 * kmag), R);
    static const QuadratureRule gl = gauss_legendre(16);
    double acc = 0.0, lo = 0.0;
    while (lo < R) {
      double hi = std::min(lo + panel, R);
      acc += gl_integrate(integrand, lo, hi, gl);
      lo = hi;
    }
    // Tail: |J_nu(z)| <= min(1, sqrt(2/(pi z))) against the power-law model.
    auto tail = tail_power_integral(0.5 * dim_, 1.0, kmag);
    out.value = std::pow(kTwoPi, 0.5 * dim_) * std::pow(kmag, 1.0 - 0.5 * dim_) * acc;
    out.residual = std::pow(kTwoPi, 0.5 * dim_) * std::pow(kmag, 1.0 - 0.5 * dim_) *
                   (tail.first + tail.second);
    out.converged = out.residual <= 1e-6 * std::fabs(out.value) + 1e-12;
    return out;
  }

  double fourier(std::span<const double> k) const {
    if (static_cast<int>(k.size()) != dim_)
      throw std::invalid_argument("RadialTabulatedKernel: dimension mismatch");
    double k2 = 0.0;
    for (double ki : k) k2 += ki * ki;
    return fourier_radial(std::sqrt(k2)).value;
  }

  double mass() const { return fourier_radial(0.0).value; }

  double second_moment(int /*axis*/) const {
    // isotropy: int x_i^2 h = (1/d) int |x|^2 h
    const double R = radii_.back();
    double grid = integrate_panels(
        [&](double r) { return evaluate_radial(r) * std::pow(r, dim_ + 1); }, 0.0, R, 64,
        1e-12);
    auto tail = tail_power_integral(dim_ + 1.0, 1.0);
    return sphere_area(dim_) * (grid + tail.first) / dim_;
  }

  // |tail integral| of |h| r^{pow} beyond the grid, with |h| <= |C|(1+r)^{-e}:
  // returns {value-or-bound, residual}; diverging integrals return +inf value.
  std::pair<double, double> tail_power_integral(double pow_r, double p,
                                                double oscillation_k = 0.0) const {
    const double R = radii_.back();
    double e = p * tail_exponent();
    double decay = e - pow_r;  // (1+r)^{-e} r^{pow} ~ r^{pow - e}
    if (decay <= 1.0) return {std::numeric_limits<double>::infinity(), 0.0};
    double c = std::pow(std::fabs(tail_coeff_), p);
    // bound r^{pow} <= (1+r)^{pow} for r >= R >= 0
    double bound = c * std::pow(1.0 + R, pow_r - e + 1.0) / (decay - 1.0);
    if (oscillation_k > 0.0) {
      // oscillatory tail: quadrature value ~ 0 contribution, keep bound as residual
      return {0.0, bound};
    }
    return {bound, 0.25 * bound};
  }

 private:
  double lerp_segment(std::size_t j, double r) const {
    double t = (r - radii_[j]) / (radii_[j + 1] - radii_[j]);
    return values_[j] + t * (values_[j + 1] - values_[j]);
  }
  double catmull_rom(std::size_t j, double r) const {
    auto val = [&](long i) {
      i = std::clamp<long>(i, 0, static_cast<long>(values_.size()) - 1);
      return values_[static_cast<std::size_t>(i)];
    };
    double t = (r - radii_[j]) / (radii_[j + 1] - radii_[j]);
    double p0 = val(static_cast<long>(j) - 1), p1 = val(j), p2 = val(j + 1),
           p3 = val(static_cast<long>(j) + 2);
    return 0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t);
  }

  int dim_;
  std::vector<double> radii_, values_;
  double tail_rho_;
  int interp_order_;
  double tail_coeff_;
};

// ---------------------------------------------------------------------------
// Kernel variant and dispatch helpers

using Kernel = std::variant<GaussianMixtureKernel, RadialTabulatedKernel>;

inline int dim(const Kernel& k) {
  return std::visit([](const auto& h) { return h.dim(); }, k);
}
inline double evaluate(const Kernel& k, std::span<const double> x) {
  return std::visit([&](const auto& h) { return h.evaluate(x); }, k);
}
inline double fourier(const Kernel& k, std::span<const double> kk) {
  return std::visit([&](const auto& h) { return h.fourier(kk); }, k);
}
inline double mass(const Kernel& k) {
  return std::visit([](const auto& h) { return h.mass(); }, k);
}
inline double second_moment(const Kernel& k, int axis) {
  return std::visit([&](const auto& h) { return h.second_moment(axis); }, k);
}
inline bool is_mixture(const Kernel& k) {
  return std::holds_alternative<GaussianMixtureKernel>(k);
}

// ---------------------------------------------------------------------------
// Moments: || |x|^a h ||_p.

struct MomentResult {
  double value = 0.0;
  bool finite = true;
  bool upper_bound = false;  // true when only a certified upper bound is computed
};

namespace detail {

// E[ |Z|^b ] for Z ~ N(0, I_d): 2^{b/2} Gamma((d+b)/2) / Gamma(d/2).
inline double std_gaussian_abs_moment(int d, double b) {
  return std::pow(2.0, 0.5 * b) * std::tgamma(0.5 * (d + b)) / std::tgamma(0.5 * d);
}

// || |x|^a N(0,S) ||_p for a single Gaussian. Exact for isotropic S; for
// anisotropic S an upper bound via |x|^2 <= s_max * x.(S/s_max)^{-1}x ... i.e.
// E[|Y|^b] <= s_max^{b/2} E[|Z|^b].
inline MomentResult single_gaussian_moment(int d, const DiagonalCovariance& S, double w, double a,
                                           double p) {
  MomentResult m;
  double b = a * p;
  double smax = S.max_entry();
  double eyb;  // E[|Y|^b], Y ~ N(0, S/p)
  if (S.is_isotropic()) {
    eyb = std::pow(S.entry(0) / p, 0.5 * b) * std_gaussian_abs_moment(d, b);
  } else {
    eyb = std::pow(smax / p, 0.5 * b) * std_gaussian_abs_moment(d, b);
    m.upper_bound = true;
  }
  // ||..||_p^p = (2pi)^{-dp/2} det(S)^{-p/2} (2pi)^{d/2} det(S/p)^{1/2} E[|Y|^b]
  double log_norm_p = -0.5 * d * p * std::log(kTwoPi) - 0.5 * p * std::log(S.det()) +
                      0.5 * d * std::log(kTwoPi) + 0.5 * (std::log(S.det()) - d * std::log(p)) +
                      std::log(eyb);
  m.value = std::fabs(w) * std::exp(log_norm_p / p);
  return m;
}

}  // namespace detail

inline MomentResult moment(const GaussianMixtureKernel& h, double a, double p) {
  if (a < 0.0 || p < 1.0) throw std::invalid_argument("moment: need a >= 0, p >= 1");
  MomentResult m;
  if (h.is_isotropic()) {
    // exact: radial quadrature of |h(r)|^p r^{d-1+ap}
    const int d = h.dim();
    double smax = 0.0;
    for (const auto& c : h.components()) smax = std::max(smax, c.cov.entry(0));
    double rcut = std::sqrt(smax) * (std::sqrt(2.0 * (d - 1 + a * p)) + 14.0);
    std::vector<double> x(d, 0.0);
    auto f = [&](double r) {
      x[0] = r;
      double v = h.evaluate(x);
      return std::pow(std::fabs(v), p) * std::pow(r, d - 1 + a * p);
    };
    double integral = integrate_panels(f, 0.0, rcut, 64, 1e-14);
    m.value = std::pow(sphere_area(d) * integral, 1.0 / p);
    return m;
  }
  // anisotropic: triangle-inequality bound over components
  double total = 0.0;
  bool any_bound = false;
  for (const auto& c : h.components()) {
    auto s = detail::single_gaussian_moment(h.dim(), c.cov, c.weight * h.scale(), a, p);
    total += s.value;
    any_bound = any_bound || s.upper_bound;
  }
  m.value = total;
  m.upper_bound = any_bound || h.components().size() > 1;
  return m;
}

inline MomentResult moment(const RadialTabulatedKernel& h, double a, double p) {
  if (a < 0.0 || p < 1.0) throw std::invalid_argument("moment: need a >= 0, p >= 1");
  MomentResult m;
  const int d = h.dim();
  auto tail = h.tail_power_integral(d - 1.0 + a * p, p);
  if (std::isinf(tail.first)) {
    m.finite = false;
    m.value = std::numeric_limits<double>::infinity();
    return m;
  }
  auto f = [&](double r) {
    return std::pow(std::fabs(h.evaluate_radial(r)), p) * std::pow(r, d - 1 + a * p);
  };
  double grid = integrate_panels(f, 0.0, h.radii().back(), 64, 1e-13);
  m.value = std::pow(sphere_area(d) * (grid + tail.first), 1.0 / p);
  m.upper_bound = tail.first > 0.0;
  return m;
}

inline MomentResult moment(const Kernel& k, double a, double p) {
  return std::visit([&](const auto& h) { return moment(h, a, p); }, k);
}

}  // namespace deconv
