#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "deconv/gausswalk.hpp"
#include "deconv/solver.hpp"

namespace deconv {

// ---------------------------------------------------------------------------
// Direction fit: along a fixed unit direction u the solution should satisfy
//   (x . Sigma^{-1} x)^{(d-2)/2} H(x)  ->  ghat(0) a_d / sqrt(det Sigma),
// the same constant for every direction. The fit reports the measured
// prefactors, the fitted log-log exponent of H, and the deviation from the
// predicted amplitude at the largest radius.

struct AsymptoticFit {
  std::vector<double> direction;  // unit vector
  std::vector<double> radii;
  std::vector<double> prefactors;      // (x.Sigma^{-1}x)^{(d-2)/2} H(x)
  std::vector<double> h_values;
  std::vector<double> err_estimates;
  double predicted_amplitude = 0.0;    // ghat(0) a_d / sqrt(det Sigma)
  double fitted_exponent = 0.0;        // slope of log |H| vs log r
  double rel_dev_at_largest = 0.0;
  double aliasing_estimate = 0.0;      // max alias error over the fit points
};

inline AsymptoticFit fit_direction(const DeconvResult& result, const DiagonalCovariance& sigma,
                                   const std::vector<double>& direction,
                                   const std::vector<double>& radii) {
  if (radii.size() < 4) throw std::invalid_argument("fit_direction: need at least 4 radii");
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] > radii[i - 1]))
      throw std::invalid_argument("fit_direction: radii must be strictly increasing");
  const int d = sigma.dim();
  double norm = std::sqrt(std::inner_product(direction.begin(), direction.end(),
                                             direction.begin(), 0.0));
  if (!(norm > 0)) throw std::invalid_argument("fit_direction: zero direction");

  AsymptoticFit fit;
  fit.direction.resize(d);
  for (int i = 0; i < d; ++i) fit.direction[i] = direction[i] / norm;
  fit.radii = radii;
  fit.predicted_amplitude =
      result.g_hat0 * walk::amplitude_constant(d) / std::sqrt(DiagonalCovariance(result.sigma_entries).det());

  std::vector<double> lr, lh;
  for (double r : radii) {
    std::vector<double> x(d);
    for (int i = 0; i < d; ++i) x[i] = r * fit.direction[i];
    // locate the matching solved point
    const PointSolution* found = nullptr;
    for (const auto& ps : result.points) {
      double dist = 0.0;
      for (int i = 0; i < d; ++i) dist += sq(ps.x[i] - x[i]);
      if (dist < 1e-18 + 1e-12 * r * r) {
        found = &ps;
        break;
      }
    }
    if (!found) throw std::invalid_argument("fit_direction: result does not cover radius " +
                                            std::to_string(r));
    double qf = sigma.quadratic_form_inv(x);
    fit.h_values.push_back(found->h_value);
    fit.err_estimates.push_back(found->err.total());
    fit.prefactors.push_back(std::pow(qf, 0.5 * (d - 2)) * found->h_value);
    fit.aliasing_estimate = std::max(fit.aliasing_estimate, found->err.alias + found->err.band);
    if (found->h_value != 0.0) {
      lr.push_back(std::log(r));
      lh.push_back(std::log(std::fabs(found->h_value)));
    }
  }
  if (lr.size() >= 2) fit.fitted_exponent = fit_line(lr, lh).slope;
  if (fit.predicted_amplitude != 0.0)
    fit.rel_dev_at_largest =
        std::fabs(fit.prefactors.back() / fit.predicted_amplitude - 1.0);
  return fit;
}

// ---------------------------------------------------------------------------
// Scan across directions. Radii beyond x_max/3 of the solver grid sit too
// close to the periodisation wrap and are dropped (reported in the notes).

struct ScanTolerances {
  double amplitude_rel = 0.02;        // deviation from the predicted constant
  double cross_direction_rel = 0.02;  // spread of normalised prefactors
};

struct ScanReport {
  std::vector<AsymptoticFit> fits;
  std::vector<double> used_radii;
  std::vector<double> dropped_radii;
  double amplitude_spread = 0.0;  // max pairwise relative spread at largest radius
  double worst_amplitude_dev = 0.0;
  bool pass = true;
  std::string note;
};

inline ScanReport scan_report(const DeconvProblem& problem,
                              const std::vector<std::vector<double>>& directions,
                              const std::vector<double>& radii, ScanTolerances tol = {}) {
  ScanReport rep;
  if (directions.empty()) {
    rep.note = "empty direction list";
    return rep;
  }
  const int d = problem.J.dim();
  const double r_cap = problem.grid.x_max / 3.0;
  for (double r : radii)
    (r <= r_cap ? rep.used_radii : rep.dropped_radii).push_back(r);
  if (!rep.dropped_radii.empty())
    rep.note = "radii beyond x_max/3 dropped (aliasing zone)";
  if (rep.used_radii.size() < 4) {
    rep.pass = false;
    rep.note += "; fewer than 4 usable radii";
    return rep;
  }

  // one solve over all direction x radius points
  std::vector<std::vector<double>> pts;
  std::vector<std::vector<double>> unit_dirs;
  for (const auto& dir : directions) {
    double norm = std::sqrt(std::inner_product(dir.begin(), dir.end(), dir.begin(), 0.0));
    std::vector<double> u(d);
    for (int i = 0; i < d; ++i) u[i] = dir[i] / norm;
    unit_dirs.push_back(u);
    for (double r : rep.used_radii) {
      std::vector<double> x(d);
      for (int i = 0; i < d; ++i) x[i] = r * u[i];
      pts.push_back(x);
    }
  }
  DeconvResult sol = solve(problem, pts);

  double pref_min = std::numeric_limits<double>::infinity();
  double pref_max = -std::numeric_limits<double>::infinity();
  for (const auto& u : unit_dirs) {
    AsymptoticFit f = fit_direction(sol, problem.sigma, u, rep.used_radii);
    rep.worst_amplitude_dev = std::max(rep.worst_amplitude_dev, f.rel_dev_at_largest);
    pref_min = std::min(pref_min, f.prefactors.back());
    pref_max = std::max(pref_max, f.prefactors.back());
    rep.fits.push_back(std::move(f));
  }
  if (pref_min != 0.0)
    rep.amplitude_spread = (pref_max - pref_min) / std::fabs(0.5 * (pref_max + pref_min));
  rep.pass = rep.worst_amplitude_dev <= tol.amplitude_rel &&
             rep.amplitude_spread <= tol.cross_direction_rel;
  return rep;
}

}  // namespace deconv
