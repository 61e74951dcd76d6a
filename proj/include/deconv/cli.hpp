#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deconv/asymptotics.hpp"
#include "deconv/config.hpp"
#include "deconv/csvio.hpp"
#include "deconv/manifest.hpp"
#include "deconv/oracle.hpp"
#include "deconv/solver.hpp"
#include "deconv/srbm.hpp"
#include "deconv/version.hpp"

namespace deconv {
namespace cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidationFail = 2;

// ---------------------------------------------------------------------------
// small parsing helpers

inline std::vector<double> parse_number_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (...) {
      throw ConfigError(what + ": cannot parse number '" + tok + "'");
    }
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

inline std::vector<std::vector<double>> parse_point_list(const std::string& s) {
  std::vector<std::vector<double>> pts;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ';'))
    if (!tok.empty()) pts.push_back(parse_number_list(tok, "points"));
  if (pts.empty()) throw ConfigError("points: empty list");
  return pts;
}

// "lo:hi:count" inclusive linear scan
inline std::vector<double> parse_radius_scan(const std::string& s) {
  double lo, hi;
  int n;
  char c1, c2;
  std::stringstream ss(s);
  if (!(ss >> lo >> c1 >> hi >> c2 >> n) || c1 != ':' || c2 != ':' || n < 1)
    throw ConfigError("radii: expected lo:hi:count, got '" + s + "'");
  std::vector<double> out;
  for (int i = 0; i < n; ++i)
    out.push_back(n == 1 ? lo : lo + (hi - lo) * i / double(n - 1));
  return out;
}

inline std::vector<std::vector<double>> points_from_radii(const std::vector<double>& radii,
                                                          std::vector<double> direction) {
  double norm = std::sqrt(std::inner_product(direction.begin(), direction.end(),
                                             direction.begin(), 0.0));
  if (!(norm > 0)) throw ConfigError("direction: zero vector");
  for (auto& u : direction) u /= norm;
  std::vector<std::vector<double>> pts;
  for (double r : radii) {
    std::vector<double> x(direction.size());
    for (std::size_t i = 0; i < direction.size(); ++i) x[i] = r * direction[i];
    pts.push_back(x);
  }
  return pts;
}

// Inline a kernel entry (object or file path) so manifests are self-contained.
inline json resolve_kernel_json(const json& entry) {
  if (entry.is_string()) return cfg::load_json_file(entry.get<std::string>());
  return entry;
}

inline json kernel_to_json(const GaussianMixtureKernel& k) {
  json j;
  j["type"] = "gaussian_mixture";
  j["dimension"] = k.dim();
  j["scale"] = k.scale();
  j["components"] = json::array();
  for (const auto& c : k.components())
    j["components"].push_back({{"weight", c.weight}, {"covariance", c.cov.entries()}});
  return j;
}

inline fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// executors: run a subcommand from its resolved JSON config. The manifest
// stores exactly this JSON, so `rerun` goes through the same code path.

inline int exec_check_assumptions(const json& rc, const fs::path& out_dir) {
  Kernel J = cfg::parse_kernel(rc.at("j_kernel"), "j_kernel");
  Kernel g = rc.contains("g_kernel") && !rc.at("g_kernel").is_null()
                 ? cfg::parse_kernel(rc.at("g_kernel"), "g_kernel")
                 : J;
  AssumptionTolerances tol;
  if (rc.contains("criticality_tol")) tol.criticality = rc.at("criticality_tol").get<double>();
  auto [rj, rg] = check_assumptions(J, g, tol);

  std::ostringstream doc;
  doc << rj.summary("J") << rg.summary("g");
  bool pass = rj.overall_pass() && rg.overall_pass();
  doc << "overall = " << (pass ? "pass" : "FAIL") << "\n";
  std::ofstream rep(out_dir / "assumption_report.txt");
  rep << doc.str();
  std::cout << doc.str();
  return pass ? kExitOk : kExitValidationFail;
}

inline int exec_walk_c(const json& rc, const fs::path& out_dir) {
  DiagonalCovariance sigma(rc.at("sigma").get<std::vector<double>>());
  auto points = rc.at("points").get<std::vector<std::vector<double>>>();
  double rel_tol = rc.value("rel_tol", 1e-10);
  const int d = sigma.dim();

  std::vector<std::string> cols;
  for (int i = 1; i <= d; ++i) cols.push_back("x" + std::to_string(i));
  for (const char* c : {"C", "tail_bound", "asymptotic", "difference"}) cols.push_back(c);
  CsvWriter csv((out_dir / "walk_c.csv").string(), kSchemaWalkC, cols);
  for (const auto& x : points) {
    auto w = walk::walk_c(sigma, x, rel_tol);
    double q = sigma.quadratic_form_inv(x);
    double asym = q > 0.0 ? walk::walk_c_asymptotic(sigma, x)
                          : std::numeric_limits<double>::quiet_NaN();
    std::vector<double> row(x.begin(), x.end());
    row.insert(row.end(), {w.value, w.tail_bound, asym, w.value - asym});
    csv.row(row);
  }
  std::cout << "walk-c: wrote " << points.size() << " rows to " << (out_dir / "walk_c.csv")
            << "\n";
  return kExitOk;
}

inline DeconvProblem problem_from_json(const json& rc) {
  cfg::ProblemConfig pc = cfg::parse_problem(rc, "problem");
  GaussianMixtureKernel J = pc.criticalize_j ? criticalize(pc.j_kernel) : pc.j_kernel;
  return DeconvProblem::make(J, pc.g_kernel, pc.grid, pc.subcritical);
}

inline int exec_solve(const json& rc, const fs::path& out_dir) {
  DeconvProblem prob = problem_from_json(rc.at("problem"));
  auto points = rc.at("points").get<std::vector<std::vector<double>>>();
  DeconvResult res = solve(prob, points);

  const int d = prob.J.dim();
  std::vector<std::string> cols;
  for (int i = 1; i <= d; ++i) cols.push_back("x" + std::to_string(i));
  for (const char* c : {"C", "f", "H", "G", "err_est"}) cols.push_back(c);
  CsvWriter csv((out_dir / "solve.csv").string(), kSchemaSolve, cols);
  for (const auto& p : res.points) {
    std::vector<double> row(p.x.begin(), p.x.end());
    row.insert(row.end(), {p.c_value, p.f_value, p.h_value, p.g_value, p.err.total()});
    csv.row(row);
  }
  std::cout << "solve: " << res.points.size() << " points, grid nodes " << res.diag.nodes
            << ", wrote " << (out_dir / "solve.csv") << "\n";
  if (!res.diag.richardson_converged)
    std::cout << "solve: warning: Richardson pair not converged, error bars inflated\n";
  return kExitOk;
}

inline int exec_oracle(const json& rc, const fs::path& out_dir) {
  DeconvProblem prob = problem_from_json(rc.at("problem"));
  auto points = rc.at("points").get<std::vector<std::vector<double>>>();
  const int d = prob.J.dim();

  std::vector<std::string> cols;
  for (int i = 1; i <= d; ++i) cols.push_back("x" + std::to_string(i));
  for (const char* c : {"H", "err_est"}) cols.push_back(c);
  CsvWriter csv((out_dir / "oracle.csv").string(), kSchemaOracle, cols);
  auto values = d == 3 ? solve_direct_quadrature(prob, points) : [&] {
    // isotropic radial reduction covers other dimensions
    std::vector<OracleValue> v(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      double r = std::sqrt(std::inner_product(points[i].begin(), points[i].end(),
                                              points[i].begin(), 0.0));
      v[i] = direct_quadrature_radial(prob, r);
    }
    return v;
  }();
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::vector<double> row(points[i].begin(), points[i].end());
    row.insert(row.end(), {values[i].value, values[i].error});
    csv.row(row);
  }
  std::cout << "oracle: wrote " << points.size() << " rows to " << (out_dir / "oracle.csv")
            << "\n";
  return kExitOk;
}

inline int exec_validate_asymptotics(const json& rc, const fs::path& out_dir) {
  DeconvProblem prob = problem_from_json(rc.at("problem"));
  auto directions = rc.at("directions").get<std::vector<std::vector<double>>>();
  auto radii = rc.at("radii").get<std::vector<double>>();
  ScanTolerances tol;
  if (rc.contains("amplitude_rel")) tol.amplitude_rel = rc.at("amplitude_rel").get<double>();
  if (rc.contains("cross_direction_rel"))
    tol.cross_direction_rel = rc.at("cross_direction_rel").get<double>();

  ScanReport rep = scan_report(prob, directions, radii, tol);

  CsvWriter csv((out_dir / "asymptotics.csv").string(), kSchemaAsymptotics,
                {"direction", "radius", "prefactor", "predicted", "H", "err_est"});
  for (std::size_t di = 0; di < rep.fits.size(); ++di) {
    const auto& f = rep.fits[di];
    CsvWriter plot((out_dir / ("plot_dir" + std::to_string(di) + ".csv")).string(),
                   kSchemaAsymptotics, {"radius", "prefactor", "predicted"});
    for (std::size_t i = 0; i < f.radii.size(); ++i) {
      csv.row({double(di), f.radii[i], f.prefactors[i], f.predicted_amplitude, f.h_values[i],
               f.err_estimates[i]});
      plot.row({f.radii[i], f.prefactors[i], f.predicted_amplitude});
    }
  }
  std::cout << "validate-asymptotics: " << rep.fits.size() << " directions, worst amplitude dev "
            << rep.worst_amplitude_dev << ", spread " << rep.amplitude_spread << " -> "
            << (rep.pass ? "pass" : "FAIL") << "\n";
  if (!rep.note.empty()) std::cout << "note: " << rep.note << "\n";
  return rep.pass ? kExitOk : kExitValidationFail;
}

inline int exec_srbm(const json& rc, const fs::path& out_dir) {
  cfg::SrbmRun run = cfg::parse_srbm(rc, "srbm");
  std::ofstream summary(out_dir / "summary.txt");

  if (run.mode == "gamma") {
    srbm::GammaOptions opt;
    opt.bins = run.bins;
    opt.r_min = run.r_min;
    opt.r_max = run.r_max;
    auto dens = srbm::sample_gamma(run.mc, opt);
    CsvWriter csv((out_dir / "gamma.csv").string(), kSchemaSrbm,
                  {"radius", "gamma_hat", "stderr", "phi_ref", "domination_ref"});
    DiagonalCovariance id = DiagonalCovariance::identity(run.mc.dimension);
    std::vector<double> x(run.mc.dimension, 0.0);
    for (std::size_t b = 0; b < dens.gamma_hat.size(); ++b) {
      double phi = srbm::gaussian_shell_average(run.mc.dimension, double(run.mc.legs),
                                                dens.edges[b], dens.edges[b + 1]);
      x[0] = dens.centers[b];
      double cphi = walk::walk_c(id, x, 1e-10, true).value;
      csv.row({dens.centers[b], dens.gamma_hat[b], dens.std_err[b], phi, 5.0 * cphi});
    }
    summary << "mode = gamma\nmean_weight = " << dens.mean_weight << " +- "
            << dens.mean_weight_se << "\ness = " << dens.ess << "\n";
    std::cout << "srbm gamma: mean weight " << dens.mean_weight << ", ess " << dens.ess << "\n";
    return kExitOk;
  }
  if (run.mode == "lambda") {
    auto fit = srbm::estimate_lambda_c(run.mc, run.n_max);
    CsvWriter csv((out_dir / "lambda.csv").string(), kSchemaSrbm,
                  {"N", "mean_weight", "stderr"});
    for (std::size_t n = 0; n < fit.mean_weights.size(); ++n)
      csv.row({double(n + 1), fit.mean_weights[n], fit.mean_weight_se[n]});
    summary << "mode = lambda\nlambda_c = " << fit.lambda_c << "\nci = [" << fit.ci_lo << ", "
            << fit.ci_hi << "]\nnoisy = " << fit.noisy << "\n";
    std::cout << "srbm lambda_c = " << fit.lambda_c << " [" << fit.ci_lo << ", " << fit.ci_hi
              << "]" << (fit.noisy ? " (noisy)" : "") << "\n";
    return kExitOk;
  }
  if (run.mode == "domination") {
    double lambda = run.lambda;
    if (lambda <= 0.0) {
      auto fit = srbm::estimate_lambda_c(run.mc, run.n_max);
      lambda = run.lambda_fraction * fit.lambda_c;
      summary << "lambda_c_estimate = " << fit.lambda_c << "\n";
    }
    std::vector<double> probes = run.probes;
    if (probes.empty()) {
      double rmax = run.r_max > 0 ? run.r_max : 3.5 * std::sqrt(double(run.n_max));
      double rmin = run.r_min > 0 ? run.r_min : rmax / 20.0;
      for (int i = 0; i < 20; ++i) probes.push_back(rmin + (rmax - rmin) * i / 19.0);
    }
    auto rep = srbm::check_domination(run.mc, lambda, run.n_max, probes);
    CsvWriter csv((out_dir / "domination.csv").string(), kSchemaSrbm,
                  {"radius", "weighted_sum", "stderr", "bound_5cphi", "pass"});
    for (std::size_t i = 0; i < rep.probes.size(); ++i)
      csv.row({rep.probes[i], rep.lhs[i], rep.lhs_se[i], rep.rhs[i],
               double(rep.lhs[i] - 2.0 * rep.lhs_se[i] <= rep.rhs[i])});
    summary << "mode = domination\nlambda = " << lambda << "\npass = " << rep.pass
            << "\ness_ok = " << rep.ess_ok << "\n";
    std::cout << "srbm domination at lambda = " << lambda << ": "
              << (rep.pass ? "pass" : "FAIL") << (rep.ess_ok ? "" : " (low ess)") << "\n";
    return rep.pass ? kExitOk : kExitValidationFail;
  }
  // amplitude
  auto rep = srbm::amplitude_consistency(run.mc.dimension, run.perturbation, run.alpha_tilde);
  summary << "mode = amplitude\nlambda = " << rep.lambda << "\nsigma2_derive = "
          << rep.sigma2_derive << "\nsigma2_moment = " << rep.sigma2_moment
          << "\namplitude = " << rep.amplitude << "\na_d = " << rep.a_d
          << "\nwithin_band = " << rep.within_band << "\n";
  std::cout << "srbm amplitude = " << rep.amplitude << " (a_d = " << rep.a_d << ", band "
            << (rep.within_band ? "pass" : "FAIL") << ")\n";
  return rep.within_band ? kExitOk : kExitValidationFail;
}

inline int dispatch(const std::string& sub, const json& rc, const fs::path& out_dir) {
  write_manifest(out_dir, sub, rc);
  if (sub == "check-assumptions") return exec_check_assumptions(rc, out_dir);
  if (sub == "walk-c") return exec_walk_c(rc, out_dir);
  if (sub == "solve") return exec_solve(rc, out_dir);
  if (sub == "oracle") return exec_oracle(rc, out_dir);
  if (sub == "validate-asymptotics") return exec_validate_asymptotics(rc, out_dir);
  if (sub == "srbm") return exec_srbm(rc, out_dir);
  throw ConfigError("unknown subcommand '" + sub + "'");
}

// ---------------------------------------------------------------------------
// argv front end

inline int run(std::vector<std::string> args) {
  CLI::App app{"Gaussian deconvolution toolkit: critical two-point functions, "
               "kernel hypothesis checks, and a self-repellent Brownian motion lab"};
  app.require_subcommand(1);
  app.fallthrough(true);  // --out/--threads may follow the subcommand
  std::string out = "out";
  int threads = 0;
  app.add_option("--out", out, "output directory");
  app.add_option("--threads", threads, "worker threads (or DECONV_THREADS)");

  // --- check-assumptions
  auto* ca = app.add_subcommand("check-assumptions", "verify kernel hypotheses for (J, g)")->fallthrough();
  std::string ca_j, ca_g;
  double ca_tol = 1e-6;
  ca->add_option("--j", ca_j, "J kernel config (JSON file)")->required();
  ca->add_option("--g", ca_g, "g kernel config (JSON file; defaults to J)");
  ca->add_option("--criticality-tol", ca_tol, "|Jhat(0)-1| tolerance");

  // --- walk-c
  auto* wc = app.add_subcommand("walk-c", "Gaussian walk two-point function C(x)")->fallthrough();
  std::string wc_sigma, wc_points, wc_radii, wc_direction;
  double wc_tol = 1e-10;
  wc->add_option("--sigma", wc_sigma, "diagonal covariance entries, comma-separated")->required();
  wc->add_option("--points", wc_points, "semicolon-separated points");
  wc->add_option("--radii", wc_radii, "lo:hi:count radial scan");
  wc->add_option("--direction", wc_direction, "scan direction (with --radii)");
  wc->add_option("--rel-tol", wc_tol, "series relative tolerance");

  // --- solve / oracle share options
  std::string so_config, so_points, so_radii, so_direction;
  bool so_subcritical = false;
  auto add_problem_opts = [&](CLI::App* sc) {
    sc->add_option("--config", so_config, "problem config (JSON file)")->required();
    sc->add_option("--points", so_points, "semicolon-separated points");
    sc->add_option("--radii", so_radii, "lo:hi:count radial scan");
    sc->add_option("--direction", so_direction, "scan direction (with --radii)");
  };
  auto* sv = app.add_subcommand("solve", "deconvolution solution H, G at points")->fallthrough();
  add_problem_opts(sv);
  sv->add_flag("--subcritical", so_subcritical, "bypass the criticality check");
  auto* orc = app.add_subcommand("oracle", "direct-quadrature oracle for H")->fallthrough();
  add_problem_opts(orc);

  // --- validate-asymptotics
  auto* va = app.add_subcommand("validate-asymptotics", "direction scans vs predicted amplitude")->fallthrough();
  std::string va_config, va_radii = "10:40:7", va_directions = "axes";
  va->add_option("--config", va_config, "problem config (JSON file)")->required();
  va->add_option("--radii", va_radii, "lo:hi:count radial scan");
  va->add_option("--directions", va_directions, "'axes' or semicolon-separated vectors");

  // --- srbm
  auto* sb = app.add_subcommand("srbm", "self-repellent Brownian motion Monte Carlo")->fallthrough();
  std::string sb_config;
  std::uint64_t sb_seed = 0;
  sb->add_option("--config", sb_config, "srbm config (JSON file)")->required();
  sb->add_option("--seed", sb_seed, "override the config seed");

  // --- rerun
  auto* rr = app.add_subcommand("rerun", "re-execute a run from its manifest")->fallthrough();
  std::string rr_manifest;
  rr->add_option("manifest", rr_manifest, "manifest.json path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (threads > 0) set_thread_count(threads);
    fs::path out_dir = prepare_out_dir(out);

    json rc;
    std::string sub;
    if (app.got_subcommand(ca)) {
      sub = "check-assumptions";
      rc["j_kernel"] = cfg::load_json_file(ca_j);
      if (!ca_g.empty()) rc["g_kernel"] = cfg::load_json_file(ca_g);
      rc["criticality_tol"] = ca_tol;
    } else if (app.got_subcommand(wc)) {
      sub = "walk-c";
      auto sigma = parse_number_list(wc_sigma, "sigma");
      std::vector<std::vector<double>> pts;
      if (!wc_points.empty()) pts = parse_point_list(wc_points);
      if (!wc_radii.empty()) {
        std::vector<double> dir =
            wc_direction.empty() ? [&] {
              std::vector<double> e(sigma.size(), 0.0);
              e[0] = 1.0;
              return e;
            }()
                                 : parse_number_list(wc_direction, "direction");
        auto scan = points_from_radii(parse_radius_scan(wc_radii), dir);
        pts.insert(pts.end(), scan.begin(), scan.end());
      }
      if (pts.empty()) throw ConfigError("walk-c: need --points or --radii");
      rc["sigma"] = sigma;
      rc["points"] = pts;
      rc["rel_tol"] = wc_tol;
    } else if (app.got_subcommand(sv) || app.got_subcommand(orc)) {
      sub = app.got_subcommand(sv) ? "solve" : "oracle";
      json pj = cfg::load_json_file(so_config);
      if (pj.contains("j_kernel")) pj["j_kernel"] = resolve_kernel_json(pj["j_kernel"]);
      if (pj.contains("g_kernel")) pj["g_kernel"] = resolve_kernel_json(pj["g_kernel"]);
      if (so_subcritical) pj["subcritical"] = true;
      std::vector<std::vector<double>> pts;
      if (!so_points.empty()) pts = parse_point_list(so_points);
      if (!so_radii.empty()) {
        if (so_direction.empty()) throw ConfigError(sub + ": --radii needs --direction");
        auto scan = points_from_radii(parse_radius_scan(so_radii),
                                      parse_number_list(so_direction, "direction"));
        pts.insert(pts.end(), scan.begin(), scan.end());
      }
      if (pts.empty()) throw ConfigError(sub + ": need --points or --radii");
      rc["problem"] = pj;
      rc["points"] = pts;
    } else if (app.got_subcommand(va)) {
      sub = "validate-asymptotics";
      json pj = cfg::load_json_file(va_config);
      if (pj.contains("j_kernel")) pj["j_kernel"] = resolve_kernel_json(pj["j_kernel"]);
      if (pj.contains("g_kernel")) pj["g_kernel"] = resolve_kernel_json(pj["g_kernel"]);
      rc["problem"] = pj;
      rc["radii"] = parse_radius_scan(va_radii);
      std::vector<std::vector<double>> dirs;
      if (va_directions == "axes") {
        int d = pj.at("j_kernel").at("dimension").get<int>();
        for (int i = 0; i < d; ++i) {
          std::vector<double> e(d, 0.0);
          e[i] = 1.0;
          dirs.push_back(e);
        }
        std::vector<double> diag(d, 1.0);
        dirs.push_back(diag);
      } else {
        dirs = parse_point_list(va_directions);
      }
      rc["directions"] = dirs;
    } else if (app.got_subcommand(sb)) {
      sub = "srbm";
      rc = cfg::load_json_file(sb_config);
      if (rc.contains("perturbation"))
        rc["perturbation"] = resolve_kernel_json(rc["perturbation"]);
      if (sb_seed != 0) rc["seed"] = sb_seed;
      cfg::parse_srbm(rc, "srbm");  // validate keys before writing the manifest
    } else if (app.got_subcommand(rr)) {
      json m = cfg::load_json_file(rr_manifest);
      sub = cfg::get_required<std::string>(m, "subcommand", "manifest");
      if (!m.contains("config")) throw ConfigError("manifest: missing 'config'");
      rc = m.at("config");
    }
    return dispatch(sub, rc, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace cli
}  // namespace deconv
