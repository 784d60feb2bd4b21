#pragma once

// Problem configuration for the command-line front end. A config is a JSON
// object:
//
//   problem      built-in operator name, "hammerstein", or a benchmark
//                functional name (mpass only)
//   target       number | array | {"constant": c} | {"manufactured": {"a": a, "b": b}}
//   solver       {tol_res, tol_grad, tol_bij, tol_zero, seed, starts, max_iters,
//                 x0, assume_surjective, start_radius}
//   hammerstein  {kernel, alpha, beta, values, grid_n, rule, perturbation, c}
//   audit        {x1, x2}
//   mpass        {anchor_a, anchor_b, x1, x2, nodes, max_iters, tol_grad}
//   probe        {n_directions, radius_min, radius_max, radius_count, box_radius,
//                 norm_blowup, grad_tol, phi_bound, starts, max_iters, seed}
//
// Unknown keys are rejected so that typos do not silently fall back to defaults.

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "varinv/coercivity.hpp"
#include "varinv/errors.hpp"
#include "varinv/functional.hpp"
#include "varinv/hammerstein.hpp"
#include "varinv/inverter.hpp"
#include "varinv/mountain_pass.hpp"
#include "varinv/operator.hpp"

namespace varinv::app {

using json = nlohmann::json;

struct HammersteinConfig {
  std::string kernel = "constant";  // constant | bilinear | tabulated
  double alpha = 1.0;
  double beta = 1.0;
  std::optional<Matrix> values;
  int grid_n = 32;
  QuadratureRule rule = QuadratureRule::Trapezoid;
  std::string perturbation = "zero";  // zero | quartic
  double c = 0.01;
};

struct AppConfig {
  std::string problem;
  std::optional<HammersteinConfig> hammerstein;
  json target;  // resolved against the operator by resolve_target
  InvertOptions solver;
  std::optional<Vector> x0;

  std::optional<Vector> x1, x2;  // audit
  AuditOptions audit;

  std::optional<Vector> anchor_a, anchor_b;  // mpass
  std::optional<Vector> mpass_x1, mpass_x2;
  MountainPassOptions mpass;

  GrowthOptions growth;
  PSProbeOptions ps;
};

namespace detail {

inline void only_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

inline double number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  return obj[key].get<double>();
}

inline int integer(const json& obj, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) throw ConfigError(std::string("'") + key + "' must be an integer");
  return obj[key].get<int>();
}

inline std::uint64_t seed_value(const json& obj, const char* key, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_unsigned()) throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
  return obj[key].get<std::uint64_t>();
}

inline bool boolean(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) throw ConfigError(std::string("'") + key + "' must be true or false");
  return obj[key].get<bool>();
}

}  // namespace detail

/// Number or array of numbers as a vector.
inline Vector to_vector(const json& j, const std::string& what) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError(what + " must be a number or a non-empty array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + " entries must be numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline json to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline std::optional<Vector> optional_vector(const json& obj, const char* key) {
  if (!obj.contains(key)) return std::nullopt;
  return to_vector(obj[key], key);
}

inline bool is_benchmark(const std::string& name) {
  return name == "two-well" || name == "two-well-2d" || name == "curved-two-well";
}

inline AppConfig parse_config(const json& root) {
  using namespace detail;
  only_keys(root, {"problem", "target", "solver", "hammerstein", "audit", "mpass", "probe"}, "config");
  AppConfig cfg;
  if (!root.contains("problem") || !root["problem"].is_string()) throw ConfigError("config needs a 'problem' name");
  cfg.problem = root["problem"].get<std::string>();
  if (cfg.problem != "hammerstein" && !is_benchmark(cfg.problem)) builtin(cfg.problem);  // validates the name
  if (root.contains("target")) cfg.target = root["target"];

  const json solver = root.value("solver", json::object());
  only_keys(solver, {"tol_res", "tol_grad", "tol_bij", "tol_zero", "seed", "starts", "max_iters", "x0",
                     "assume_surjective", "start_radius"},
            "solver");
  InvertOptions& s = cfg.solver;
  s.tol_res = number(solver, "tol_res", s.tol_res);
  s.tol_grad = number(solver, "tol_grad", s.tol_grad);
  s.tol_bij = number(solver, "tol_bij", s.tol_bij);
  s.tol_zero = number(solver, "tol_zero", s.tol_zero);
  s.seed = seed_value(solver, "seed", s.seed);
  s.starts = integer(solver, "starts", s.starts);
  s.max_iters = integer(solver, "max_iters", s.max_iters);
  s.start_radius = number(solver, "start_radius", s.start_radius);
  s.assume_surjective = boolean(solver, "assume_surjective", s.assume_surjective);
  cfg.x0 = optional_vector(solver, "x0");
  s.validate();

  if (cfg.problem == "hammerstein") {
    if (!root.contains("hammerstein")) throw ConfigError("problem 'hammerstein' needs a 'hammerstein' block");
    const json& h = root["hammerstein"];
    only_keys(h, {"kernel", "alpha", "beta", "values", "grid_n", "rule", "perturbation", "c"}, "hammerstein");
    HammersteinConfig hc;
    hc.kernel = h.value("kernel", hc.kernel);
    hc.alpha = number(h, "alpha", hc.alpha);
    hc.beta = number(h, "beta", hc.kernel == "constant" ? hc.alpha : hc.beta);
    hc.grid_n = integer(h, "grid_n", hc.grid_n);
    hc.perturbation = h.value("perturbation", hc.perturbation);
    hc.c = number(h, "c", hc.c);
    const std::string rule = h.value("rule", std::string("trapezoid"));
    if (rule == "trapezoid") {
      hc.rule = QuadratureRule::Trapezoid;
    } else if (rule == "gauss-legendre") {
      hc.rule = QuadratureRule::GaussLegendre;
    } else {
      throw ConfigError("unknown quadrature rule '" + rule + "'");
    }
    if (hc.grid_n < 4) throw ConfigError("hammerstein grid_n must be >= 4");
    if (hc.kernel == "tabulated") {
      if (!h.contains("values") || !h["values"].is_array()) throw ConfigError("tabulated kernel needs 'values'");
      const json& rows = h["values"];
      Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const Vector row = to_vector(rows[i], "kernel values row");
        if (row.size() != m.cols()) throw ConfigError("tabulated kernel must be square");
        m.row(static_cast<Index>(i)) = row.transpose();
      }
      if (m.rows() != hc.grid_n) throw ConfigError("tabulated kernel size must equal grid_n");
      hc.values = std::move(m);
    } else if (hc.kernel != "constant" && hc.kernel != "bilinear") {
      throw ConfigError("unknown kernel '" + hc.kernel + "'");
    }
    if (hc.perturbation != "zero" && hc.perturbation != "quartic") {
      throw ConfigError("unknown perturbation '" + hc.perturbation + "'");
    }
    cfg.hammerstein = hc;
  } else if (root.contains("hammerstein")) {
    throw ConfigError("'hammerstein' block given for problem '" + cfg.problem + "'");
  }

  if (root.contains("audit")) {
    const json& a = root["audit"];
    only_keys(a, {"x1", "x2"}, "audit");
    cfg.x1 = optional_vector(a, "x1");
    cfg.x2 = optional_vector(a, "x2");
  }
  cfg.audit.tol_res = s.tol_res;
  cfg.audit.classify = s.classify_options();

  if (root.contains("mpass")) {
    const json& m = root["mpass"];
    only_keys(m, {"anchor_a", "anchor_b", "x1", "x2", "nodes", "max_iters", "tol_grad"}, "mpass");
    cfg.anchor_a = optional_vector(m, "anchor_a");
    cfg.anchor_b = optional_vector(m, "anchor_b");
    cfg.mpass_x1 = optional_vector(m, "x1");
    cfg.mpass_x2 = optional_vector(m, "x2");
    cfg.mpass.nodes = integer(m, "nodes", cfg.mpass.nodes);
    cfg.mpass.max_iters = integer(m, "max_iters", cfg.mpass.max_iters);
    cfg.mpass.tol_grad = number(m, "tol_grad", cfg.mpass.tol_grad);
    if (cfg.mpass.nodes < 8) throw ConfigError("mpass nodes must be >= 8");
    if (!(cfg.mpass.tol_grad > 0)) throw ConfigError("mpass tol_grad must be positive");
  }
  cfg.audit.mountain_pass = cfg.mpass;

  const json probe = root.value("probe", json::object());
  only_keys(probe, {"n_directions", "radius_min", "radius_max", "radius_count", "box_radius", "norm_blowup",
                    "grad_tol", "phi_bound", "starts", "max_iters", "seed"},
            "probe");
  cfg.growth.n_directions = integer(probe, "n_directions", cfg.growth.n_directions);
  if (probe.contains("radius_min") || probe.contains("radius_max") || probe.contains("radius_count")) {
    cfg.growth.radii = geometric_radii(number(probe, "radius_min", 1.0), number(probe, "radius_max", 1e3),
                                       integer(probe, "radius_count", 16));
  }
  cfg.ps.box_radius = number(probe, "box_radius", cfg.ps.box_radius);
  cfg.ps.norm_blowup = number(probe, "norm_blowup", cfg.ps.norm_blowup);
  cfg.ps.grad_tol = number(probe, "grad_tol", cfg.ps.grad_tol);
  cfg.ps.phi_bound = number(probe, "phi_bound", cfg.ps.phi_bound);
  cfg.ps.starts = integer(probe, "starts", cfg.ps.starts);
  cfg.ps.max_iters = integer(probe, "max_iters", cfg.ps.max_iters);
  if (probe.contains("seed")) {
    cfg.growth.seed = seed_value(probe, "seed", cfg.growth.seed);
    cfg.ps.seed = cfg.growth.seed;
  }
  if (cfg.growth.n_directions < 1 || cfg.ps.starts < 1 || cfg.ps.max_iters < 0) {
    throw ConfigError("probe counts must be positive");
  }
  return cfg;
}

inline AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(root);
}

/// --seed overrides every seed in the config.
inline void override_seed(AppConfig& cfg, std::uint64_t seed) {
  cfg.solver.seed = seed;
  cfg.audit.classify.seed = seed;
  cfg.growth.seed = seed;
  cfg.ps.seed = seed;
}

struct Problem {
  Operator op;
  std::optional<QuadratureGrid> grid;
  std::optional<KernelSpec> kernel;
  std::optional<PerturbationSpec> perturbation;
};

inline Problem build_problem(const AppConfig& cfg) {
  if (is_benchmark(cfg.problem)) throw ConfigError("'" + cfg.problem + "' is a functional, not an operator");
  if (!cfg.hammerstein) return {builtin(cfg.problem), std::nullopt, std::nullopt, std::nullopt};
  const HammersteinConfig& h = *cfg.hammerstein;
  const QuadratureGrid grid = make_grid(h.grid_n, h.rule);
  KernelSpec kernel;
  if (h.kernel == "constant") {
    if (h.alpha != h.beta) throw ConfigError("constant kernel needs alpha == beta");
    kernel = constant_kernel(h.alpha);
  } else if (h.kernel == "bilinear") {
    // K(t, s) = alpha + (beta - alpha) t s spans exactly [alpha, beta]
    kernel = bilinear_kernel(h.alpha, h.beta - h.alpha);
  } else {
    kernel = tabulated_kernel(*h.values);
  }
  const PerturbationSpec pert = h.perturbation == "quartic" ? quartic_perturbation(h.c) : zero_perturbation();
  return {assemble_operator(kernel, pert, grid), grid, kernel, pert};
}

/// Target vector for `problem`; manufactured targets are F(a + b s) on the grid.
inline Vector resolve_target(const AppConfig& cfg, const Problem& p) {
  const Index n = p.op.dim_out();
  const json& t = cfg.target;
  if (t.is_null()) throw ConfigError("config needs a 'target'");
  if (t.is_number()) return Vector::Constant(n, t.get<double>());
  if (t.is_array()) {
    Vector y = to_vector(t, "target");
    if (y.size() != n) throw ConfigError("target has " + std::to_string(y.size()) + " entries, operator needs " +
                                         std::to_string(n));
    return y;
  }
  if (t.is_object() && t.contains("constant")) {
    detail::only_keys(t, {"constant"}, "target");
    return Vector::Constant(n, detail::number(t, "constant", 0.0));
  }
  if (t.is_object() && t.contains("manufactured")) {
    detail::only_keys(t, {"manufactured"}, "target");
    if (!p.grid) throw ConfigError("manufactured targets need the hammerstein problem");
    const json& m = t["manufactured"];
    detail::only_keys(m, {"a", "b"}, "manufactured target");
    const Vector xs = Vector::Constant(n, detail::number(m, "a", 1.0)) + detail::number(m, "b", 0.0) * p.grid->nodes;
    return manufacture_target(*p.kernel, *p.perturbation, *p.grid, xs);
  }
  throw ConfigError("unrecognized target specification");
}

/// Exact solution behind a manufactured target, if any.
inline std::optional<Vector> manufactured_solution(const AppConfig& cfg, const Problem& p) {
  if (!p.grid || !cfg.target.is_object() || !cfg.target.contains("manufactured")) return std::nullopt;
  const json& m = cfg.target["manufactured"];
  return Vector(Vector::Constant(p.grid->size(), detail::number(m, "a", 1.0)) + detail::number(m, "b", 0.0) * p.grid->nodes);
}

/// Effective settings, echoed into every report.
inline json settings_json(const AppConfig& cfg) {
  const InvertOptions& s = cfg.solver;
  json j;
  j["problem"] = cfg.problem;
  j["target"] = cfg.target;
  j["solver"] = {{"tol_res", s.tol_res},
                 {"tol_grad", s.tol_grad},
                 {"tol_bij", s.tol_bij},
                 {"tol_zero", s.tol_zero},
                 {"tol_switch", s.tol_switch},
                 {"seed", s.seed},
                 {"starts", s.starts},
                 {"max_iters", s.max_iters},
                 {"start_radius", s.start_radius},
                 {"assume_surjective", s.assume_surjective},
                 {"cubic_model", s.cubic_model == CubicModel::Taylor ? "taylor" : "third-derivative"},
                 {"random_directions", s.random_directions}};
  if (cfg.x0) j["solver"]["x0"] = to_json(*cfg.x0);
  if (cfg.hammerstein) {
    const auto& h = *cfg.hammerstein;
    j["hammerstein"] = {{"kernel", h.kernel}, {"alpha", h.alpha},   {"beta", h.beta},
                        {"grid_n", h.grid_n}, {"rule", to_string(h.rule)}, {"perturbation", h.perturbation}};
    if (h.perturbation == "quartic") j["hammerstein"]["c"] = h.c;
  }
  j["mpass"] = {{"nodes", cfg.mpass.nodes},
                {"max_iters", cfg.mpass.max_iters},
                {"tol_grad", cfg.mpass.tol_grad},
                {"step_fraction", cfg.mpass.step_fraction},
                {"stall_limit", cfg.mpass.stall_limit},
                {"polish_iters", cfg.mpass.polish_iters}};
  j["probe"] = {{"n_directions", cfg.growth.n_directions},
                {"radii", cfg.growth.radii},
                {"growth_seed", cfg.growth.seed},
                {"box_radius", cfg.ps.box_radius},
                {"norm_blowup", cfg.ps.norm_blowup},
                {"grad_tol", cfg.ps.grad_tol},
                {"phi_bound", cfg.ps.phi_bound},
                {"starts", cfg.ps.starts},
                {"max_iters", cfg.ps.max_iters},
                {"ps_seed", cfg.ps.seed}};
  return j;
}

}  // namespace varinv::app
