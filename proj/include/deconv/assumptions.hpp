#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "deconv/kernel.hpp"
#include "deconv/numerics.hpp"
#include "deconv/parallel.hpp"

namespace deconv {

// ---------------------------------------------------------------------------
// Tolerances for the kernel-hypothesis checker.

struct AssumptionTolerances {
  double criticality = 1e-6;       // |Jhat(0) - 1| for user-supplied kernels
  double moment_cap = 1e12;        // a finite moment must also be sanely sized
  std::vector<double> eps_ladder = {1.0, 0.5, 0.25, 0.1};  // tried in order
};

struct InfraredGridSpec {
  int n_radii = 512;
  double r_min = 1e-4;
  double k_max = 40.0;
  int n_random_directions = 64;
  unsigned seed = 0x5EED;  // direction set is fixed, not a run-time knob
};

// ---------------------------------------------------------------------------
// Infrared constant: inf over k of (Jhat(0) - Jhat(k)) / (|k|^2 ^ 1).

struct InfraredEstimate {
  double k_ir = 0.0;
  double argmin_radius = 0.0;
  bool at_grid_boundary = false;  // heuristic warning: grid may be too coarse
  bool positive() const { return k_ir > 0.0; }
};

inline InfraredEstimate estimate_infrared(const Kernel& J,
                                          const InfraredGridSpec& grid = {}) {
  const int d = dim(J);
  const double jhat0 = fourier(J, std::vector<double>(d, 0.0));

  // Direction set: +/- axes plus a fixed quasi-random batch.
  std::vector<std::vector<double>> dirs;
  for (int i = 0; i < d; ++i) {
    std::vector<double> e(d, 0.0);
    e[i] = 1.0;
    dirs.push_back(e);
    e[i] = -1.0;
    dirs.push_back(e);
  }
  std::mt19937_64 rng(grid.seed);
  std::normal_distribution<double> gauss;
  for (int n = 0; n < grid.n_random_directions; ++n) {
    std::vector<double> u(d);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& ui : u) {
        ui = gauss(rng);
        norm += ui * ui;
      }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (auto& ui : u) ui /= norm;
    dirs.push_back(u);
  }

  std::vector<double> radii(grid.n_radii);
  const double lr0 = std::log(grid.r_min), lr1 = std::log(grid.k_max);
  for (int i = 0; i < grid.n_radii; ++i)
    radii[i] = std::exp(lr0 + (lr1 - lr0) * i / double(grid.n_radii - 1));
  // |k| = 1 is the kink of |k|^2 ^ 1 and a universal minimiser candidate
  radii.push_back(1.0);

  std::vector<double> dir_min(dirs.size(), std::numeric_limits<double>::infinity());
  std::vector<double> dir_argmin(dirs.size(), 0.0);
  parallel_for(dirs.size(), [&](std::size_t di) {
    std::vector<double> k(d);
    for (double r : radii) {
      for (int i = 0; i < d; ++i) k[i] = r * dirs[di][i];
      double ratio = (jhat0 - fourier(J, k)) / std::min(r * r, 1.0);
      if (ratio < dir_min[di]) {
        dir_min[di] = ratio;
        dir_argmin[di] = r;
      }
    }
  });

  InfraredEstimate est;
  est.k_ir = std::numeric_limits<double>::infinity();
  for (std::size_t di = 0; di < dirs.size(); ++di) {
    if (dir_min[di] < est.k_ir) {
      est.k_ir = dir_min[di];
      est.argmin_radius = dir_argmin[di];
    }
  }

  // Analytic large-|k| control for mixtures: |Jhat(k)| <= A exp(-s k_max^2/2)
  // beyond the grid, so the ratio is at least jhat0 - A exp(...) there.
  if (const auto* mix = std::get_if<GaussianMixtureKernel>(&J)) {
    double bound = mix->abs_weight_sum() *
                   std::exp(-0.5 * mix->min_fourier_decay_scale() * sq(grid.k_max));
    double tail_ratio = jhat0 - bound;
    if (tail_ratio < est.k_ir) {
      est.k_ir = tail_ratio;
      est.argmin_radius = grid.k_max;
      est.at_grid_boundary = true;
    }
  } else {
    // Tabulated kernels: no analytic tail; flag if the minimiser sits on the
    // boundary of the sampled range.
    if (est.argmin_radius <= grid.r_min * 1.0001 || est.argmin_radius >= grid.k_max * 0.9999)
      est.at_grid_boundary = true;
  }
  return est;
}

// ---------------------------------------------------------------------------
// Criticalisation: rescale so the Fourier transform is exactly 1 at k = 0.

inline GaussianMixtureKernel criticalize(const GaussianMixtureKernel& J0) {
  double m = J0.mass();
  if (!(m > 0.0)) throw std::invalid_argument("criticalize: kernel has nonpositive mass");
  if (m == 1.0) return J0;
  return J0.scaled(1.0 / m);
}

inline Kernel criticalize(const Kernel& J0) {
  if (const auto* mix = std::get_if<GaussianMixtureKernel>(&J0)) return criticalize(*mix);
  throw std::invalid_argument("criticalize: only Gaussian-mixture kernels can be rescaled");
}

// ---------------------------------------------------------------------------
// Moment interpolation (Hoelder): given |x|^a h in L^{p_a}, the exponent at a
// lower order b is 1/p_b = (a-b)/(a-2) + (b-2)/((a-2) p_a).

struct MomentInterpolation {
  double p_b = 1.0;
  double p_b_star = 1.0;  // d / (d - b + 2)
  bool strict = false;    // p_b < p_b_star guaranteed
};

inline MomentInterpolation interpolate_moment_exponent(double a, double b, double p_a, int d) {
  if (!(2.0 <= b && b <= a && a <= d + 2.0) || p_a < 1.0)
    throw std::invalid_argument("interpolate_moment_exponent: need 2 <= b <= a <= d+2, p_a >= 1");
  MomentInterpolation out;
  if (a == b) {
    out.p_b = p_a;
  } else {
    double inv = (a - b) / (a - 2.0) + (b - 2.0) / ((a - 2.0) * p_a);
    out.p_b = 1.0 / inv;
  }
  out.p_b_star = d / (d - b + 2.0);
  double p_a_star = d / (d - a + 2.0);
  out.strict = (b > 2.0) && (p_a < p_a_star);
  return out;
}

// ---------------------------------------------------------------------------
// Assumption report

struct CheckEntry {
  bool pass = false;
  double value = 0.0;
  std::string note;
};

struct AssumptionReport {
  int dimension = 0;
  bool evenness = false;
  CheckEntry moment_l1_order0, moment_l2_order0;   // h in L1 and L2
  CheckEntry moment_l1_order2, moment_l2_order2;   // |x|^2 h in L1 and L2
  double epsilon_used = 0.0;
  CheckEntry epsilon_moment;                       // |x|^{2+eps} h in L1
  bool high_moment_applicable = false;             // only for d > 4
  double high_p_used = 1.0;
  double high_p_star = 0.0;                        // d / 4 for order d-2
  CheckEntry high_moment_lp, high_moment_l2;       // |x|^{d-2} h in L^p and L2
  bool criticality_applicable = false;             // only for J
  CheckEntry criticality;                          // |Jhat(0) - 1|
  bool infrared_applicable = false;                // only for J
  InfraredEstimate infrared;

  bool overall_pass() const {
    bool ok = evenness && moment_l1_order0.pass && moment_l2_order0.pass &&
              moment_l1_order2.pass && moment_l2_order2.pass && epsilon_moment.pass;
    if (high_moment_applicable) ok = ok && high_moment_lp.pass && high_moment_l2.pass;
    if (criticality_applicable) ok = ok && criticality.pass;
    if (infrared_applicable) ok = ok && infrared.positive();
    return ok;
  }

  std::string summary(const std::string& name) const {
    std::ostringstream os;
    auto line = [&](const std::string& key, const CheckEntry& e) {
      os << name << "." << key << " = " << e.value << " [" << (e.pass ? "pass" : "FAIL") << "]"
         << (e.note.empty() ? "" : " (" + e.note + ")") << "\n";
    };
    os << name << ".dimension = " << dimension << "\n";
    os << name << ".evenness = " << (evenness ? "pass" : "FAIL") << "\n";
    line("norm_l1", moment_l1_order0);
    line("norm_l2", moment_l2_order0);
    line("moment2_l1", moment_l1_order2);
    line("moment2_l2", moment_l2_order2);
    os << name << ".epsilon = " << epsilon_used << "\n";
    line("moment_2+eps_l1", epsilon_moment);
    if (high_moment_applicable) {
      os << name << ".high_order = " << dimension - 2 << ", p = " << high_p_used
         << ", p_star = " << high_p_star << "\n";
      line("high_moment_lp", high_moment_lp);
      line("high_moment_l2", high_moment_l2);
    }
    if (criticality_applicable) line("criticality", criticality);
    if (infrared_applicable) {
      os << name << ".k_ir = " << infrared.k_ir << " ["
         << (infrared.positive() ? "pass" : "FAIL") << "]"
         << (infrared.at_grid_boundary ? " (minimiser at grid boundary)" : "") << "\n";
    }
    os << name << ".overall = " << (overall_pass() ? "pass" : "FAIL") << "\n";
    return os.str();
  }
};

namespace detail {

inline CheckEntry run_moment_check(const Kernel& h, double a, double p, double cap) {
  CheckEntry e;
  MomentResult m = moment(h, a, p);
  e.value = m.value;
  e.pass = m.finite && std::isfinite(m.value) && m.value < cap;
  if (!m.finite) e.note = "divergent (tail exponent)";
  if (m.upper_bound) e.note = e.note.empty() ? "upper bound" : e.note + "; upper bound";
  return e;
}

}  // namespace detail

// Checks one kernel. criticality/infrared are run only when as_j is true.
inline AssumptionReport check_kernel(const Kernel& h, bool as_j,
                                     const AssumptionTolerances& tol = {},
                                     const InfraredGridSpec& grid = {}) {
  AssumptionReport r;
  const int d = dim(h);
  r.dimension = d;
  r.evenness = true;  // both kernel classes are even by construction

  r.moment_l1_order0 = detail::run_moment_check(h, 0.0, 1.0, tol.moment_cap);
  r.moment_l2_order0 = detail::run_moment_check(h, 0.0, 2.0, tol.moment_cap);
  r.moment_l1_order2 = detail::run_moment_check(h, 2.0, 1.0, tol.moment_cap);
  r.moment_l2_order2 = detail::run_moment_check(h, 2.0, 2.0, tol.moment_cap);

  // Largest epsilon from the ladder whose moment is finite.
  r.epsilon_used = tol.eps_ladder.back();
  for (double eps : tol.eps_ladder) {
    CheckEntry e = detail::run_moment_check(h, 2.0 + eps, 1.0, tol.moment_cap);
    if (e.pass || eps == tol.eps_ladder.back()) {
      r.epsilon_used = eps;
      r.epsilon_moment = e;
      if (e.pass) break;
    }
  }

  if (d > 4) {
    r.high_moment_applicable = true;
    r.high_p_star = d / 4.0;
    // p must satisfy 1 <= p < d/4 strictly; p = 1 always qualifies.
    r.high_p_used = 1.0;
    r.high_moment_lp = detail::run_moment_check(h, double(d - 2), 1.0, tol.moment_cap);
    r.high_moment_l2 = detail::run_moment_check(h, double(d - 2), 2.0, tol.moment_cap);
  }

  if (as_j) {
    r.criticality_applicable = true;
    double jhat0 = fourier(h, std::vector<double>(d, 0.0));
    r.criticality.value = std::fabs(jhat0 - 1.0);
    r.criticality.pass = r.criticality.value <= tol.criticality;

    r.infrared_applicable = true;
    r.infrared = estimate_infrared(h, grid);
  }
  return r;
}

// Checks the pair (J, g); J additionally gets criticality and infrared.
inline std::pair<AssumptionReport, AssumptionReport> check_assumptions(
    const Kernel& J, const Kernel& g, const AssumptionTolerances& tol = {},
    const InfraredGridSpec& grid = {}) {
  if (dim(J) != dim(g)) throw std::invalid_argument("check_assumptions: dimension mismatch");
  return {check_kernel(J, /*as_j=*/true, tol, grid), check_kernel(g, /*as_j=*/false, tol, grid)};
}

}  // namespace deconv
