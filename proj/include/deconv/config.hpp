#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "deconv/kernel.hpp"
#include "deconv/solver.hpp"
#include "deconv/srbm.hpp"

namespace deconv {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace cfg {

// Unknown keys are rejected so typos cannot silently fall back to defaults.
inline void require_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError(context + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
T get_required(const json& j, const std::string& key, const std::string& context) {
  if (!j.contains(key)) throw ConfigError(context + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(context + ": key '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T def, const std::string& context) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(context + ": key '" + key + "' has the wrong type");
  }
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
  return j;
}

// ---------------------------------------------------------------------------
// Kernel specs

inline DiagonalCovariance parse_covariance(const json& j, int d, const std::string& context) {
  std::vector<double> entries;
  if (j.is_number()) {
    entries.assign(d, j.get<double>());
  } else if (j.is_array()) {
    entries = j.get<std::vector<double>>();
    if (static_cast<int>(entries.size()) != d)
      throw ConfigError(context + ": covariance needs " + std::to_string(d) + " entries");
  } else {
    throw ConfigError(context + ": covariance must be a number or an array");
  }
  try {
    return DiagonalCovariance(entries);
  } catch (const std::exception& e) {
    throw ConfigError(context + ": " + e.what());
  }
}

inline RadialTabulatedKernel parse_radial_table(const json& j, const std::string& context) {
  require_keys(j, {"type", "dimension", "file", "tail_rho", "interpolation_order"}, context);
  int d = get_required<int>(j, "dimension", context);
  std::string file = get_required<std::string>(j, "file", context);
  double rho = get_required<double>(j, "tail_rho", context);
  int order = get_or<int>(j, "interpolation_order", 1, context);
  std::ifstream in(file);
  if (!in) throw ConfigError(context + ": cannot open sample table '" + file + "'");
  std::vector<double> radii, values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    double r, v;
    if (!(row >> r >> v))
      throw ConfigError(context + ": malformed row in '" + file + "': " + line);
    radii.push_back(r);
    values.push_back(v);
  }
  try {
    return RadialTabulatedKernel(d, std::move(radii), std::move(values), rho, order);
  } catch (const std::exception& e) {
    throw ConfigError(context + ": " + e.what());
  }
}

inline GaussianMixtureKernel parse_mixture(const json& j, const std::string& context) {
  require_keys(j, {"type", "dimension", "scale", "components"}, context);
  int d = get_required<int>(j, "dimension", context);
  double scale = get_or<double>(j, "scale", 1.0, context);
  if (!j.contains("components") || !j.at("components").is_array() || j.at("components").empty())
    throw ConfigError(context + ": 'components' must be a non-empty array");
  std::vector<GaussianComponent> comps;
  for (const auto& c : j.at("components")) {
    require_keys(c, {"weight", "covariance"}, context + ".components");
    double w = get_required<double>(c, "weight", context + ".components");
    comps.push_back({w, parse_covariance(c.at("covariance"), d, context + ".components")});
  }
  try {
    return GaussianMixtureKernel(d, std::move(comps), scale);
  } catch (const std::exception& e) {
    throw ConfigError(context + ": " + e.what());
  }
}

inline Kernel parse_kernel(const json& j, const std::string& context) {
  std::string type = get_required<std::string>(j, "type", context);
  if (type == "gaussian_mixture") return parse_mixture(j, context);
  if (type == "radial_table") return parse_radial_table(j, context);
  throw ConfigError(context + ": unknown kernel type '" + type +
                    "' (expected gaussian_mixture or radial_table)");
}

// A kernel entry is either an inline object or a path to a JSON file.
inline Kernel parse_kernel_entry(const json& j, const std::string& context) {
  if (j.is_string()) return parse_kernel(load_json_file(j.get<std::string>()), context);
  return parse_kernel(j, context);
}

// ---------------------------------------------------------------------------
// Solver problem config

inline GridSpec parse_grid(const json& j, const std::string& context) {
  require_keys(j,
               {"x_max", "points_per_axis", "far_dk", "k_max", "window_order", "window_start",
                "series_rel_tol", "node_budget"},
               context);
  GridSpec g;
  g.x_max = get_or<double>(j, "x_max", 0.0, context);
  g.points_per_axis = get_or<int>(j, "points_per_axis", 0, context);
  g.far_dk = get_or<double>(j, "far_dk", 0.0, context);
  g.k_max = get_or<double>(j, "k_max", 0.0, context);
  g.window_order = get_or<int>(j, "window_order", 3, context);
  g.window_start = get_or<double>(j, "window_start", 0.10, context);
  g.series_rel_tol = get_or<double>(j, "series_rel_tol", 1e-10, context);
  g.node_budget = get_or<std::int64_t>(j, "node_budget", g.node_budget, context);
  return g;
}

struct ProblemConfig {
  GaussianMixtureKernel j_kernel;
  GaussianMixtureKernel g_kernel;
  GridSpec grid;
  bool criticalize_j = false;
  bool subcritical = false;
};

inline ProblemConfig parse_problem(const json& j, const std::string& context) {
  require_keys(j, {"j_kernel", "g_kernel", "grid", "criticalize", "subcritical"}, context);
  if (!j.contains("j_kernel") || !j.contains("g_kernel"))
    throw ConfigError(context + ": needs 'j_kernel' and 'g_kernel'");
  Kernel kj = parse_kernel_entry(j.at("j_kernel"), context + ".j_kernel");
  Kernel kg = parse_kernel_entry(j.at("g_kernel"), context + ".g_kernel");
  const auto* mj = std::get_if<GaussianMixtureKernel>(&kj);
  const auto* mg = std::get_if<GaussianMixtureKernel>(&kg);
  if (!mj || !mg)
    throw ConfigError(context + ": the solver requires gaussian_mixture kernels "
                      "(tabulated kernels are supported by check-assumptions only)");
  ProblemConfig pc{*mj, *mg, {}, false, false};
  if (j.contains("grid")) pc.grid = parse_grid(j.at("grid"), context + ".grid");
  pc.criticalize_j = get_or<bool>(j, "criticalize", false, context);
  pc.subcritical = get_or<bool>(j, "subcritical", false, context);
  return pc;
}

// ---------------------------------------------------------------------------
// SRBM config

struct SrbmRun {
  srbm::SrbmConfig mc;
  std::string mode = "gamma";  // gamma | lambda | domination | amplitude
  int n_max = 10;
  double lambda = 0.0;          // absolute lambda for domination
  double lambda_fraction = 0.95;  // used when lambda == 0: fraction of lambda_c
  int bins = 20;
  double r_min = 0.0, r_max = 0.0;
  std::vector<double> probes;
  // amplitude mode
  std::optional<GaussianMixtureKernel> perturbation;
  double alpha_tilde = 0.0;
};

inline SrbmRun parse_srbm(const json& j, const std::string& context) {
  require_keys(j,
               {"dimension", "alpha", "legs", "substeps", "paths", "v0", "r0", "seed", "mode",
                "n_max", "lambda", "lambda_fraction", "bins", "r_min", "r_max", "probes",
                "perturbation", "alpha_tilde"},
               context);
  SrbmRun r;
  r.mc.dimension = get_or<int>(j, "dimension", 5, context);
  r.mc.alpha = get_or<double>(j, "alpha", 0.0, context);
  r.mc.legs = get_or<int>(j, "legs", 4, context);
  r.mc.substeps = get_or<int>(j, "substeps", 16, context);
  r.mc.paths = get_or<long long>(j, "paths", 100000, context);
  r.mc.v.v0 = get_or<double>(j, "v0", 1.0, context);
  r.mc.v.r0 = get_or<double>(j, "r0", 1.0, context);
  r.mc.seed = get_or<std::uint64_t>(j, "seed", 1, context);
  r.mode = get_or<std::string>(j, "mode", "gamma", context);
  r.n_max = get_or<int>(j, "n_max", 10, context);
  r.lambda = get_or<double>(j, "lambda", 0.0, context);
  r.lambda_fraction = get_or<double>(j, "lambda_fraction", 0.95, context);
  r.bins = get_or<int>(j, "bins", 20, context);
  r.r_min = get_or<double>(j, "r_min", 0.0, context);
  r.r_max = get_or<double>(j, "r_max", 0.0, context);
  if (j.contains("probes")) r.probes = j.at("probes").get<std::vector<double>>();
  if (j.contains("perturbation")) {
    Kernel k = parse_kernel_entry(j.at("perturbation"), context + ".perturbation");
    const auto* m = std::get_if<GaussianMixtureKernel>(&k);
    if (!m) throw ConfigError(context + ": perturbation must be a gaussian_mixture");
    r.perturbation = *m;
  }
  r.alpha_tilde = get_or<double>(j, "alpha_tilde", 0.0, context);
  if (r.mode != "gamma" && r.mode != "lambda" && r.mode != "domination" && r.mode != "amplitude")
    throw ConfigError(context + ": unknown mode '" + r.mode + "'");
  return r;
}

}  // namespace cfg
}  // namespace deconv
