#pragma once

// The five front-end commands. Each returns the process exit code; failures
// that should map to exit 1 are thrown and turned into a diagnostic by guarded().

#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <ostream>

#include "varinv/app/report.hpp"

namespace varinv::app {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kError = 1,
  kStalled = 2,
  kHypothesisViolated = 3,
  kContradiction = 4,
  kNotCoercive = 5,
  kNoGeometry = 6,
};

struct RunContext {
  fs::path out_dir = ".";
  std::ostream* log = nullptr;  // null when --quiet
  std::ostream* err = &std::cerr;
};

inline void prepare_out(const RunContext& ctx) {
  std::error_code ec;
  fs::create_directories(ctx.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + ctx.out_dir.string() + "'");
}

inline int status_exit_code(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return kOk;
    case SolveStatus::Stalled: return kStalled;
    case SolveStatus::HypothesisViolated: return kHypothesisViolated;
  }
  return kError;
}

inline int cmd_invert(const AppConfig& cfg, const RunContext& ctx) {
  const Problem p = build_problem(cfg);
  const Vector y = resolve_target(cfg, p);
  const Vector x0 = cfg.x0 ? *cfg.x0 : Vector(Vector::Zero(p.op.dim_in()));
  require_dim(x0, p.op.dim_in(), "solver x0");
  prepare_out(ctx);
  const SolveReport rep = invert(p.op, y, x0, cfg.solver);

  json j = settings_json(cfg);
  j["command"] = "invert";
  j["report"] = to_json(rep);
  if (const auto xs = manufactured_solution(cfg, p)) {
    j["manufactured"] = {{"grid_norm_error", grid_norm(*p.grid, rep.solution - *xs)}};
    if (rep.solution.cwiseAbs().minCoeff() > 0.0) {
      j["manufactured"]["fixed_point_residual"] =
          fixed_point_residual(*p.kernel, *p.perturbation, *p.grid, rep.solution, y);
    }
  }
  write_json(ctx.out_dir / "report.json", j);
  write_text(ctx.out_dir / "trace.csv", trace_csv(rep.trace));
  write_text(ctx.out_dir / "solution.txt", vector_lines(rep.solution));
  if (ctx.log) {
    *ctx.log << "invert " << cfg.problem << ": " << to_string(rep.status) << ", residual "
             << format_double(rep.residual_norm) << ", " << rep.iterations << " iterations\n";
  }
  return status_exit_code(rep.status);
}

inline int cmd_audit(const AppConfig& cfg, const RunContext& ctx) {
  if (!cfg.x1 || !cfg.x2) throw ConfigError("audit needs x1 and x2");
  const Problem p = build_problem(cfg);
  prepare_out(ctx);
  const AuditReport rep = injectivity_audit(p.op, *cfg.x1, *cfg.x2, cfg.audit);
  json j = settings_json(cfg);
  j["command"] = "audit";
  j["x1"] = to_json(*cfg.x1);
  j["x2"] = to_json(*cfg.x2);
  j["report"] = to_json(rep);
  write_json(ctx.out_dir / "audit_report.json", j);
  if (ctx.log) {
    *ctx.log << "audit " << cfg.problem << ": " << to_string(rep.verdict) << ", gap " << format_double(rep.gap);
    if (!rep.critical_points.empty()) *ctx.log << ", critical value " << format_double(rep.critical_points.front().psi_value);
    *ctx.log << "\n";
  }
  return rep.verdict == AuditVerdict::HypothesisContradiction ? kContradiction : kOk;
}

inline int cmd_probe(const AppConfig& cfg, const RunContext& ctx) {
  const Problem p = build_problem(cfg);
  const Vector y = resolve_target(cfg, p);
  prepare_out(ctx);
  const GrowthReport growth = ray_growth(p.op, y, cfg.growth);
  const PSProbeReport ps = ps_probe(as_functional(LeastSquaresFunctional(p.op, y)), cfg.ps);
  json g = settings_json(cfg);
  g["command"] = "probe";
  g["report"] = to_json(growth);
  json s = settings_json(cfg);
  s["command"] = "probe";
  s["report"] = to_json(ps);
  write_json(ctx.out_dir / "growth_report.json", g);
  write_json(ctx.out_dir / "ps_probe_report.json", s);
  const bool pass = growth.coercive_flag && !ps.violation_found;
  if (ctx.log) {
    *ctx.log << "probe " << cfg.problem << ": min exponent " << format_double(growth.min_exponent) << ", coercive "
             << (growth.coercive_flag ? "yes" : "no") << ", PS violation " << (ps.violation_found ? "found" : "none")
             << "\n";
  }
  return pass ? kOk : kNotCoercive;
}

inline int cmd_mpass(const AppConfig& cfg, const RunContext& ctx) {
  Functional f;
  Vector a, b;
  std::optional<Vector> shift;
  if (is_benchmark(cfg.problem)) {
    if (!cfg.anchor_a || !cfg.anchor_b) throw ConfigError("mpass on a benchmark needs anchor_a and anchor_b");
    f = benchmark_functional(cfg.problem);
    a = *cfg.anchor_a;
    b = *cfg.anchor_b;
  } else {
    if (!cfg.mpass_x1 || !cfg.mpass_x2) throw ConfigError("mpass on an operator needs x1 and x2");
    const Problem p = build_problem(cfg);
    f = make_injectivity_functional(p.op, *cfg.mpass_x1, *cfg.mpass_x2);
    a = Vector::Zero(p.op.dim_in());
    b = *cfg.mpass_x2 - *cfg.mpass_x1;
    shift = *cfg.mpass_x1;
  }
  require_dim(a, f.dim, "anchor_a");
  require_dim(b, f.dim, "anchor_b");
  prepare_out(ctx);
  MountainPassOptions o = cfg.mpass;
  o.record_history = true;
  MountainPassReport rep;
  try {
    rep = mountain_pass(f, a, b, o);
  } catch (const GeometryError& e) {
    *ctx.err << "mpass: " << e.what() << "\n";
    return kNoGeometry;
  } catch (const StallError& e) {
    *ctx.err << "mpass: " << e.what() << "\n";
    return kStalled;
  }
  json j = settings_json(cfg);
  j["command"] = "mpass";
  j["functional"] = f.name;
  j["anchor_a"] = to_json(a);
  j["anchor_b"] = to_json(b);
  j["report"] = to_json(rep);
  if (shift) j["report"]["critical_point_original"] = to_json(Vector(rep.critical_point + *shift));
  write_json(ctx.out_dir / "mpass_report.json", j);
  write_text(ctx.out_dir / "path_history.csv", path_csv(rep.history));
  if (ctx.log) {
    *ctx.log << "mpass " << f.name << ": critical value " << format_double(rep.critical_value) << ", gradient "
             << format_double(rep.gradient_norm) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// Demos

inline std::vector<std::string> demo_names() { return {"section2-scalar", "section2-planar", "section3-hammerstein"}; }

namespace detail {

inline double bisect(const std::function<double(double)>& g, double lo, double hi) {
  double glo = g(lo);
  for (int k = 0; k < 200 && hi - lo > 0.0; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double gm = g(mid);
    if ((gm < 0) == (glo < 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline void row(std::ostream& os, std::initializer_list<std::string> cells) {
  for (const auto& c : cells) os << std::setw(16) << c;
  os << "\n";
}

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace detail

inline int demo_scalar(std::ostream& os) {
  const Operator op = quintic1d();
  double worst_res = 0.0, worst_err = 0.0;
  int converged = 0;
  detail::row(os, {"y", "x", "residual", "|x - oracle|"});
  for (int k = 0; k <= 40; ++k) {
    const double y = -10.0 + 0.5 * k;
    const auto rep = invert(op, Vector::Constant(1, y), Vector::Zero(1));
    const double oracle = detail::bisect([y](double x) { return x * x * x + std::pow(x, 5) - y; }, -3.0, 3.0);
    const double err = std::abs(rep.solution(0) - oracle);
    worst_res = std::max(worst_res, rep.residual_norm);
    worst_err = std::max(worst_err, err);
    converged += rep.status == SolveStatus::Converged;
    if (k % 5 == 0) detail::row(os, {format_double(y), detail::sci(rep.solution(0)), detail::sci(rep.residual_norm), detail::sci(err)});
  }
  os << "targets 41, converged " << converged << ", max residual " << detail::sci(worst_res) << ", max error "
     << detail::sci(worst_err) << "\n";
  return converged == 41 ? kOk : kStalled;
}

inline int demo_planar(std::ostream& os) {
  const Operator op = planar();
  double worst = 0.0;
  int converged = 0;
  detail::row(os, {"y1", "y2", "x1", "x2", "residual"});
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      Vector y(2);
      y << -3.0 + 1.5 * i, -3.0 + 1.5 * j;
      const auto rep = invert(op, y, Vector::Zero(2));
      worst = std::max(worst, rep.residual_norm);
      converged += rep.status == SolveStatus::Converged;
      detail::row(os, {format_double(y(0)), format_double(y(1)), detail::sci(rep.solution(0)),
                       detail::sci(rep.solution(1)), detail::sci(rep.residual_norm)});
    }
  }
  os << "targets 25, converged " << converged << ", max residual " << detail::sci(worst) << "\n";
  return converged == 25 ? kOk : kStalled;
}

inline int demo_hammerstein(std::ostream& os) {
  InvertOptions o;
  o.assume_surjective = true;
  bool ok = true;
  detail::row(os, {"n", "kernel", "solution", "grid error", "fixed point"});
  for (int n : {16, 32, 64}) {
    const auto g = make_grid(n);
    for (const auto& k : {constant_kernel(1.0), bilinear_kernel(1.0, 1.0)}) {
      const Operator op = assemble_operator(k, zero_perturbation(), g);
      for (const bool affine : {false, true}) {
        const Vector xs = affine ? Vector(Vector::Ones(n) + g.nodes) : Vector(Vector::Constant(n, 2.0));
        const Vector y = manufacture_target(k, zero_perturbation(), g, xs);
        const auto rep = invert(op, y, Vector::Zero(n), o);
        const double err = grid_norm(g, rep.solution - xs);
        const double fp = fixed_point_residual(k, zero_perturbation(), g, rep.solution, y);
        ok = ok && rep.status == SolveStatus::Converged && err <= 1e-6 && fp <= 1e-12;
        detail::row(os, {std::to_string(n), k.name, affine ? "1+s" : "2", detail::sci(err), detail::sci(fp)});
      }
    }
  }
  os << (ok ? "all recovered" : "recovery failed") << "\n";
  return ok ? kOk : kStalled;
}

inline int cmd_demo(const std::string& name, std::ostream& os) {
  if (name == "section2-scalar") return demo_scalar(os);
  if (name == "section2-planar") return demo_planar(os);
  if (name == "section3-hammerstein") return demo_hammerstein(os);
  throw ConfigError("unknown demo '" + name + "'");
}

/// Runs `fn`, mapping library and config errors to exit 1 with a message on `err`.
inline int guarded(const std::function<int()>& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const varinv::Error& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kError;
}

}  // namespace varinv::app
