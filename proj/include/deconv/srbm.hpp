#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "deconv/gausswalk.hpp"
#include "deconv/kernel.hpp"
#include "deconv/numerics.hpp"
#include "deconv/parallel.hpp"
#include "deconv/solver.hpp"

namespace deconv {
namespace srbm {

// Pair interaction v(r) = v0 max(0, 1 - r/r0): bounded, continuous, compactly
// supported, nonnegative.
struct Interaction {
  double v0 = 1.0;
  double r0 = 1.0;
  double operator()(double r) const { return r >= r0 ? 0.0 : v0 * (1.0 - r / r0); }
};

struct SrbmConfig {
  int dimension = 5;
  double alpha = 0.0;
  int legs = 4;       // N
  int substeps = 16;  // m: midpoint-rule resolution of the time integral
  long long paths = 100000;
  Interaction v;
  std::uint64_t seed = 1;
  int batches = 64;  // fixed batch split; results do not depend on threads

  void validate() const {
    if (dimension < 5) throw std::invalid_argument("srbm: dimension must be >= 5");
    if (legs < 1) throw std::invalid_argument("srbm: legs must be >= 1");
    if (substeps < 8) throw std::invalid_argument("srbm: substeps must be >= 8");
    if (paths < 1) throw std::invalid_argument("srbm: paths must be >= 1");
    if (v.v0 < 0.0 || v.r0 <= 0.0) throw std::invalid_argument("srbm: invalid interaction");
    if (alpha < 0.0) throw std::invalid_argument("srbm: alpha must be >= 0");
    if (batches < 1) throw std::invalid_argument("srbm: batches must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Deterministic normals: Box-Muller over mt19937_64, so equal seeds give
// bit-identical streams on any platform/thread count.

class NormalGen {
 public:
  explicit NormalGen(std::uint64_t seed) : eng_(seed) {}
  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01(), u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = kTwoPi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

 private:
  double uniform01() {  // in (0, 1)
    return double(eng_() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t batch) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (batch + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Hamiltonian: H_N = sum_{i<j} V(B_i, B_j) with
// V(f,g) = int_0^1 v(|f(s)-g(s)|) ds, midpoint rule on m substeps.
// Legs are stored as their m midpoint positions (row-major [leg][sub][axis]).

inline double pair_interaction(std::span<const double> leg_a, std::span<const double> leg_b,
                               int substeps, int d, const Interaction& v) {
  double acc = 0.0;
  for (int l = 0; l < substeps; ++l) {
    double r2 = 0.0;
    for (int i = 0; i < d; ++i) r2 += sq(leg_a[l * d + i] - leg_b[l * d + i]);
    acc += v(std::sqrt(r2));
  }
  return acc / substeps;
}

inline double hamiltonian(std::span<const double> legs, int n_legs, int substeps, int d,
                          const Interaction& v) {
  double h = 0.0;
  const std::size_t leg_len = std::size_t(substeps) * d;
  for (int i = 0; i < n_legs; ++i)
    for (int j = i + 1; j < n_legs; ++j)
      h += pair_interaction(legs.subspan(i * leg_len, leg_len),
                            legs.subspan(j * leg_len, leg_len), substeps, d, v);
  return h;
}

// ---------------------------------------------------------------------------
// Core driver: simulates paths of n_max Brownian legs (variance 1 per leg per
// coordinate, substep midpoints + leg endpoints), tracks the pair Hamiltonian
// incrementally, and feeds (weights w_N, endpoints B(N)) for N = 1..n_max to
// a per-path sink. Batch accumulators are combined in batch order.

inline std::vector<double> run_weighted_paths(
    const SrbmConfig& cfg, int n_max, std::size_t acc_size,
    const std::function<void(std::vector<double>& acc, std::span<const double> weights,
                             std::span<const double> endpoints)>& sink) {
  cfg.validate();
  const int d = cfg.dimension, m = cfg.substeps;
  const long long P = cfg.paths;
  const int B = cfg.batches;

  std::vector<std::vector<double>> batch_acc(B);
  parallel_for(B, [&](std::size_t b) {
    NormalGen gauss(mix_seed(cfg.seed, b));
    const long long lo = P * (long long)b / B, hi = P * (long long)(b + 1) / B;
    auto& acc = batch_acc[b];
    acc.assign(acc_size, 0.0);

    std::vector<double> legs(std::size_t(n_max) * m * d);  // midpoints
    std::vector<double> endpoints(std::size_t(n_max) * d);
    std::vector<double> weights(n_max);
    std::vector<double> cur(d);
    const double sd_half = std::sqrt(0.5 / m), sd_full = std::sqrt(1.0 / m);

    for (long long pth = lo; pth < hi; ++pth) {
      std::fill(cur.begin(), cur.end(), 0.0);
      double h = 0.0;
      const std::size_t leg_len = std::size_t(m) * d;
      for (int leg = 0; leg < n_max; ++leg) {
        double* mids = &legs[leg * leg_len];
        for (int l = 0; l < m; ++l) {
          double sd = (l == 0) ? sd_half : sd_full;
          for (int i = 0; i < d; ++i) {
            cur[i] += sd * gauss();
            mids[l * d + i] = cur[i];
          }
        }
        for (int i = 0; i < d; ++i) {
          cur[i] += sd_half * gauss();
          endpoints[leg * d + i] = cur[i];
        }
        for (int prev = 0; prev < leg; ++prev)
          h += pair_interaction(std::span<const double>(&legs[prev * leg_len], leg_len),
                                std::span<const double>(mids, leg_len), m, d, cfg.v);
        weights[leg] = std::exp(-cfg.alpha * h);
      }
      sink(acc, weights, endpoints);
    }
  });

  std::vector<double> total(acc_size, 0.0);
  for (int b = 0; b < B; ++b)
    for (std::size_t i = 0; i < acc_size; ++i) total[i] += batch_acc[b][i];
  return total;
}

// ---------------------------------------------------------------------------
// Materialised ensemble: endpoints B(N) and weights e^{-alpha H_N} per path.
// Streaming estimators below avoid this; it exists for direct inspection.

struct PathEnsemble {
  int dimension = 0;
  int legs = 0;
  std::vector<double> endpoints;  // [path * d + axis], endpoint of the full path
  std::vector<double> weights;    // in (0, 1]
  double ess = 0.0;               // (sum w)^2 / sum w^2
};

inline PathEnsemble sample_ensemble(const SrbmConfig& cfg) {
  cfg.validate();
  const int d = cfg.dimension, N = cfg.legs;
  PathEnsemble ens;
  ens.dimension = d;
  ens.legs = N;
  ens.endpoints.reserve(std::size_t(cfg.paths) * d);
  ens.weights.reserve(cfg.paths);
  // single batch: paths arrive in index order
  SrbmConfig one = cfg;
  one.batches = 1;
  run_weighted_paths(one, N, 1,
                     [&](std::vector<double>&, std::span<const double> w,
                         std::span<const double> ep) {
                       for (int k = 0; k < d; ++k)
                         ens.endpoints.push_back(ep[std::size_t(N - 1) * d + k]);
                       ens.weights.push_back(w[N - 1]);
                     });
  double sw = 0.0, sw2 = 0.0;
  for (double w : ens.weights) {
    sw += w;
    sw2 += w * w;
  }
  ens.ess = sw > 0.0 ? sw * sw / std::max(sw2, 1e-300) : 0.0;
  return ens;
}

// ---------------------------------------------------------------------------
// Endpoint density estimate of the unnormalised marginal: radial histogram
// with per-shell standard errors from the weighted-sample variance.

struct RadialDensity {
  std::vector<double> edges;      // bins + 1
  std::vector<double> centers;    // probe radii
  std::vector<double> gamma_hat;  // density per shell
  std::vector<double> std_err;
  std::vector<double> counts;     // raw endpoint counts
  double mean_weight = 0.0;       // = ||Gamma_{alpha,N}||_1 estimate
  double mean_weight_se = 0.0;
  double ess = 0.0;
  int legs = 0;
};

struct GammaOptions {
  int bins = 20;
  double r_min = 0.0;
  double r_max = 0.0;  // 0: 3.8 sqrt(N)
  double min_ess = 100.0;
};

inline RadialDensity sample_gamma(const SrbmConfig& cfg, GammaOptions opt = {}) {
  cfg.validate();
  const int d = cfg.dimension, N = cfg.legs, nb = opt.bins;
  double rmax = opt.r_max > 0.0 ? opt.r_max : 3.8 * std::sqrt(double(N));
  double rmin = opt.r_min;

  RadialDensity out;
  out.legs = N;
  out.edges.resize(nb + 1);
  for (int b = 0; b <= nb; ++b) out.edges[b] = rmin + (rmax - rmin) * b / nb;
  for (int b = 0; b < nb; ++b) out.centers.push_back(0.5 * (out.edges[b] + out.edges[b + 1]));

  // acc: per bin (sum_y, sum_y2, count) + (sum_w, sum_w2)
  const std::size_t acc_size = std::size_t(nb) * 3 + 2;
  std::vector<double> vol(nb);
  for (int b = 0; b < nb; ++b)
    vol[b] = ball_volume(d, out.edges[b + 1]) - ball_volume(d, out.edges[b]);

  auto total = run_weighted_paths(
      cfg, N, acc_size,
      [&](std::vector<double>& acc, std::span<const double> w, std::span<const double> ep) {
        const double* x = &ep[(N - 1) * d];
        double r2 = 0.0;
        for (int i = 0; i < d; ++i) r2 += x[i] * x[i];
        double r = std::sqrt(r2);
        double weight = w[N - 1];
        if (r >= rmin && r < rmax) {
          int b = std::min(nb - 1, int((r - rmin) / (rmax - rmin) * nb));
          double y = weight / vol[b];
          acc[b * 3] += y;
          acc[b * 3 + 1] += y * y;
          acc[b * 3 + 2] += 1.0;
        }
        acc[std::size_t(nb) * 3] += weight;
        acc[std::size_t(nb) * 3 + 1] += weight * weight;
      });

  const double P = double(cfg.paths);
  double sw = total[std::size_t(nb) * 3], sw2 = total[std::size_t(nb) * 3 + 1];
  out.mean_weight = sw / P;
  out.mean_weight_se = std::sqrt(std::max(0.0, (sw2 / P - sq(out.mean_weight)) / (P - 1.0)));
  out.ess = sw > 0.0 ? sw * sw / std::max(sw2, 1e-300) : 0.0;
  if (out.ess < opt.min_ess)
    throw std::runtime_error("sample_gamma: effective sample size " + std::to_string(out.ess) +
                             " < " + std::to_string(opt.min_ess) +
                             " (alpha too large for naive importance sampling)");
  for (int b = 0; b < nb; ++b) {
    double sy = total[b * 3], sy2 = total[b * 3 + 1];
    double mean = sy / P;
    double var = std::max(0.0, (sy2 / P - mean * mean) / (P - 1.0));
    out.gamma_hat.push_back(mean);
    out.std_err.push_back(std::sqrt(var));
    out.counts.push_back(total[b * 3 + 2]);
  }
  return out;
}

// Shell average of the Gaussian phi_t over [r0, r1] (the honest comparator
// for a histogram bin).
inline double gaussian_shell_average(int d, double t, double r0, double r1) {
  auto num = adaptive_simpson(
      [&](double r) {
        return std::pow(kTwoPi * t, -0.5 * d) * std::exp(-0.5 * r * r / t) * std::pow(r, d - 1);
      },
      r0, r1, 1e-14);
  auto den = (std::pow(r1, d) - std::pow(r0, d)) / d;
  return num / den;
}

// ---------------------------------------------------------------------------
// lambda_c estimate: ||Gamma_{alpha,N}||_1 = E[e^{-alpha H_N}] decays like
// lambda_c^{-N}; a log-linear fit of the mean weights over N = 1..n_max gives
// the estimate, with a confidence interval from the regression slope error.

struct LambdaFit {
  double lambda_c = 1.0;
  double ci_lo = 1.0, ci_hi = 1.0;
  std::vector<double> mean_weights;
  std::vector<double> mean_weight_se;
  bool noisy = false;  // wide interval / non-monotone sequence
};

inline LambdaFit estimate_lambda_c(const SrbmConfig& cfg, int n_max) {
  cfg.validate();
  if (n_max < 3) throw std::invalid_argument("estimate_lambda_c: need n_max >= 3");
  const std::size_t acc_size = std::size_t(n_max) * 2;
  auto total = run_weighted_paths(
      cfg, n_max, acc_size,
      [&](std::vector<double>& acc, std::span<const double> w, std::span<const double>) {
        for (int n = 0; n < n_max; ++n) {
          acc[n * 2] += w[n];
          acc[n * 2 + 1] += w[n] * w[n];
        }
      });

  LambdaFit fit;
  const double P = double(cfg.paths);
  std::vector<double> ns, logw;
  for (int n = 0; n < n_max; ++n) {
    double mean = total[n * 2] / P;
    double var = std::max(0.0, (total[n * 2 + 1] / P - mean * mean) / (P - 1.0));
    fit.mean_weights.push_back(mean);
    fit.mean_weight_se.push_back(std::sqrt(var));
    if (mean > 0.0) {
      ns.push_back(n + 1.0);
      logw.push_back(std::log(mean));
    }
  }
  LinearFit lf = fit_line(ns, logw);
  fit.lambda_c = std::exp(-lf.slope);
  fit.ci_lo = std::exp(-(lf.slope + 1.96 * lf.slope_se));
  fit.ci_hi = std::exp(-(lf.slope - 1.96 * lf.slope_se));
  for (std::size_t n = 1; n < fit.mean_weights.size(); ++n)
    if (fit.mean_weights[n] > fit.mean_weights[n - 1] + 3.0 * fit.mean_weight_se[n])
      fit.noisy = true;
  if (fit.ci_hi - fit.ci_lo > 0.2 * fit.lambda_c) fit.noisy = true;
  return fit;
}

// ---------------------------------------------------------------------------
// Gaussian domination check: the truncated two-point sum
//   sum_{N=1}^{n_max} lambda^N Gamma_{alpha,N}(x)
// against 5 C_phi(x), with C_phi the full Brownian return series (n >= 1).

struct DominationReport {
  std::vector<double> probes;
  std::vector<double> lhs, lhs_se;
  std::vector<double> rhs;  // 5 C_phi
  std::vector<double> ess_per_leg;
  bool pass = true;
  bool ess_ok = true;
};

inline DominationReport check_domination(const SrbmConfig& cfg, double lambda, int n_max,
                                         const std::vector<double>& probe_radii,
                                         double shell_halfwidth = 0.0) {
  cfg.validate();
  const int d = cfg.dimension;
  const int np = static_cast<int>(probe_radii.size());
  if (np == 0) throw std::invalid_argument("check_domination: no probes");
  double hw = shell_halfwidth;
  if (hw <= 0.0) {
    hw = probe_radii.size() > 1 ? 0.4 * (probe_radii[1] - probe_radii[0]) : 0.2;
  }

  std::vector<double> vol(np), lo(np), hi(np);
  for (int i = 0; i < np; ++i) {
    lo[i] = std::max(0.0, probe_radii[i] - hw);
    hi[i] = probe_radii[i] + hw;
    vol[i] = ball_volume(d, hi[i]) - ball_volume(d, lo[i]);
  }

  // acc: per probe (sum_y, sum_y2) + per leg (sum_w, sum_w2)
  const std::size_t acc_size = std::size_t(np) * 2 + std::size_t(n_max) * 2;
  auto total = run_weighted_paths(
      cfg, n_max, acc_size,
      [&](std::vector<double>& acc, std::span<const double> w, std::span<const double> ep) {
        for (int i = 0; i < np; ++i) {
          double y = 0.0;
          double lpow = 1.0;
          for (int n = 0; n < n_max; ++n) {
            lpow *= lambda;
            const double* x = &ep[std::size_t(n) * d];
            double r2 = 0.0;
            for (int k = 0; k < d; ++k) r2 += x[k] * x[k];
            double r = std::sqrt(r2);
            if (r >= lo[i] && r < hi[i]) y += lpow * w[n] / vol[i];
          }
          acc[i * 2] += y;
          acc[i * 2 + 1] += y * y;
        }
        for (int n = 0; n < n_max; ++n) {
          acc[np * 2 + n * 2] += w[n];
          acc[np * 2 + n * 2 + 1] += w[n] * w[n];
        }
      });

  DominationReport rep;
  rep.probes = probe_radii;
  const double P = double(cfg.paths);
  for (int n = 0; n < n_max; ++n) {
    double sw = total[np * 2 + n * 2], sw2 = total[np * 2 + n * 2 + 1];
    double ess = sw > 0.0 ? sw * sw / std::max(sw2, 1e-300) : 0.0;
    rep.ess_per_leg.push_back(ess);
    if (ess < 100.0) rep.ess_ok = false;
  }
  std::vector<double> x(d, 0.0);
  DiagonalCovariance id = DiagonalCovariance::identity(d);
  for (int i = 0; i < np; ++i) {
    double mean = total[i * 2] / P;
    double var = std::max(0.0, (total[i * 2 + 1] / P - mean * mean) / (P - 1.0));
    double se = std::sqrt(var);
    x[0] = probe_radii[i];
    double cphi = walk::walk_c(id, x, 1e-10, /*include_first_step=*/true).value;
    rep.lhs.push_back(mean);
    rep.lhs_se.push_back(se);
    rep.rhs.push_back(5.0 * cphi);
    if (mean - 2.0 * se > rep.rhs.back()) rep.pass = false;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Amplitude structure check: for the proxy kernel J = lambda phi_1 + Pi
// (Pi an even perturbation obeying the |x|^{-3(d-2)} decay shape at scale
// alpha_tilde), criticality fixes lambda = 1 - Pihat(0) and the predicted
// amplitude in |x|^{-(d-2)} units is a_d / sigma^2, which must stay within
// a 5 alpha_tilde band of a_d.

struct AmplitudeReport {
  double lambda = 1.0;
  double sigma2_derive = 1.0;  // from derive_sigma on the proxy kernel
  double sigma2_moment = 1.0;  // lambda + int x_1^2 Pi, via the moment path
  double amplitude = 0.0;      // a_d / sigma^2
  double a_d = 0.0;
  double alpha_tilde = 0.0;
  double decay_shape_constant = 0.0;  // max |Pi(x)| (1+|x|)^{3(d-2)}
  bool within_band = false;
};

inline AmplitudeReport amplitude_consistency(
    int d, const std::optional<GaussianMixtureKernel>& perturbation, double alpha_tilde) {
  AmplitudeReport rep;
  rep.a_d = walk::amplitude_constant(d);
  rep.alpha_tilde = alpha_tilde;

  double pi_hat0 = 0.0, pi_x2 = 0.0;
  if (perturbation) {
    if (perturbation->dim() != d)
      throw std::invalid_argument("amplitude_consistency: perturbation dimension mismatch");
    pi_hat0 = perturbation->mass();
    pi_x2 = perturbation->second_moment(0);
    // decay-shape check against (1+|x|)^{-3(d-2)}
    std::vector<double> x(d, 0.0);
    for (double r = 0.0; r <= 20.0; r += 0.25) {
      x[0] = r;
      double c = std::fabs(perturbation->evaluate(x)) * std::pow(1.0 + r, 3.0 * (d - 2));
      rep.decay_shape_constant = std::max(rep.decay_shape_constant, c);
    }
    if (rep.decay_shape_constant > 5.0 * alpha_tilde)
      throw std::invalid_argument(
          "amplitude_consistency: perturbation violates the decay-shape bound "
          "(constant " + std::to_string(rep.decay_shape_constant) + " > 5 alpha_tilde)");
  }
  rep.lambda = 1.0 - pi_hat0;
  if (!(rep.lambda > 0.0))
    throw std::invalid_argument("amplitude_consistency: perturbation mass too large");

  std::vector<GaussianComponent> comps = {{rep.lambda, DiagonalCovariance::identity(d)}};
  if (perturbation)
    for (const auto& c : perturbation->components())
      comps.push_back({c.weight * perturbation->scale(), c.cov});
  GaussianMixtureKernel proxy(d, comps);

  rep.sigma2_derive = derive_sigma(Kernel(proxy)).entry(0);
  rep.sigma2_moment = rep.lambda * 1.0 + pi_x2;
  rep.amplitude = rep.a_d / rep.sigma2_derive;
  rep.within_band = std::fabs(rep.amplitude - rep.a_d) <= 5.0 * alpha_tilde * rep.a_d;
  return rep;
}

}  // namespace srbm
}  // namespace deconv
