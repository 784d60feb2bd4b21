#pragma once

// Global inversion of F by descent on phi_y(x) = 1/2 |F(x) - y|^2.
//
// Critical points are classified as Regular (F'(x) bijective), Degenerate
// (F' = 0, F'' = 0, F''' nontrivial and onto) or HypothesisViolated. Descent
// combines Gauss-Newton steps on the regular branch, third-order corrector
// steps near degenerate points and gradient steps, each under a backtracking
// line search so phi never increases along an accepted run.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "varinv/errors.hpp"
#include "varinv/functional.hpp"
#include "varinv/linalg.hpp"
#include "varinv/operator.hpp"

namespace varinv {

enum class CriticalTag { Regular, Degenerate, HypothesisViolated };

inline const char* to_string(CriticalTag tag) {
  switch (tag) {
    case CriticalTag::Regular: return "Regular";
    case CriticalTag::Degenerate: return "Degenerate";
    case CriticalTag::HypothesisViolated: return "HypothesisViolated";
  }
  return "?";
}

struct ClassifyOptions {
  double tol_bij = 1e-8;
  double tol_zero = 1e-8;
  /// Accept F'''(x) as onto without the diagonal certificate.
  bool assume_surjective = false;
  int random_directions = 32;
  std::uint64_t seed = 7;
};

struct CriticalPointClass {
  CriticalTag tag = CriticalTag::HypothesisViolated;
  double sigma_min = 0.0;
  double jacobian_norm = 0.0;
  double d2_norm = 0.0;  ///< max over sampled unit h of |F''(x)h^2|
  double d3_sup = 0.0;   ///< max over sampled unit h of |F'''(x)h^3|
  double d3_inf = 0.0;   ///< min over sampled unit h of |F'''(x)h^3|
  bool diagonal_third = false;
  Vector diagonal_coeffs;
};

/// Result of probing whether F'''(x)h^3 = (c_i h_i^3)_i.
struct DiagonalProbe {
  bool diagonal = false;
  Vector coeffs;
};

inline DiagonalProbe probe_diagonal_third(const Operator& op, const Vector& x, const std::vector<Vector>& dirs) {
  const Index n = op.dim_in();
  DiagonalProbe probe;
  if (!op.square()) return probe;
  const double rel = op.has_analytic_third() ? 1e-9 : 1e-4;
  probe.coeffs = Vector::Zero(n);
  double scale = 0.0;
  for (Index j = 0; j < n; ++j) {
    const Vector t = d3_dir(op, x, Vector::Unit(n, j));
    probe.coeffs(j) = t(j);
    scale = std::max(scale, t.cwiseAbs().maxCoeff());
  }
  const double tol = rel * std::max(1.0, scale);
  for (Index j = 0; j < n; ++j) {
    const Vector t = d3_dir(op, x, Vector::Unit(n, j));
    for (Index i = 0; i < n; ++i) {
      if (i != j && std::abs(t(i)) > tol) return probe;
    }
  }
  for (const Vector& h : dirs) {
    const Vector t = d3_dir(op, x, h);
    const Vector model = probe.coeffs.array() * h.array().cube();
    if ((t - model).cwiseAbs().maxCoeff() > tol) return probe;
  }
  probe.diagonal = true;
  return probe;
}

/// Classifies x for the square operator `op`: Regular (F'(x) bijective), Degenerate
/// (F' = F'' = 0 with F''' onto) or HypothesisViolated.
inline CriticalPointClass classify_critical(const Operator& op, const Vector& x, const ClassifyOptions& tols = {}) {
  if (!op.square()) throw UnsupportedError("classify_critical: operator is not square");
  require_dim(x, op.dim_in(), "classify_critical");

  CriticalPointClass cls;
  const Matrix j = jacobian(op, x);
  cls.sigma_min = sigma_min(j);
  cls.jacobian_norm = spectral_norm(j);

  const auto dirs = sample_unit_directions(op.dim_in(), tols.random_directions, tols.seed);
  cls.d3_inf = std::numeric_limits<double>::infinity();
  for (const Vector& h : dirs) {
    cls.d2_norm = std::max(cls.d2_norm, d2_dir(op, x, h).norm());
    const double t = d3_dir(op, x, h).norm();
    cls.d3_sup = std::max(cls.d3_sup, t);
    cls.d3_inf = std::min(cls.d3_inf, t);
  }

  if (cls.sigma_min > tols.tol_bij) {
    cls.tag = CriticalTag::Regular;
    return cls;
  }
  const auto probe = probe_diagonal_third(op, x, dirs);
  cls.diagonal_third = probe.diagonal;
  cls.diagonal_coeffs = probe.coeffs;
  const bool onto = (probe.diagonal && (probe.coeffs.array().abs() > tols.tol_zero).all()) || tols.assume_surjective;
  if (cls.jacobian_norm <= tols.tol_zero && cls.d2_norm <= tols.tol_zero && cls.d3_sup > tols.tol_zero && onto) {
    cls.tag = CriticalTag::Degenerate;
  } else {
    cls.tag = CriticalTag::HypothesisViolated;
  }
  return cls;
}

/// x - damping * F'(x)^{-1} (F(x) - y). A singular Jacobian falls back to the
/// Tikhonov-regularized normal equations.
inline Vector gauss_newton_step(const Operator& op, const Vector& y, const Vector& x, double damping = 1.0) {
  if (!op.square()) throw UnsupportedError("gauss_newton_step: operator is not square");
  if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("gauss_newton_step: damping must lie in (0, 1]");
  require_dim(y, op.dim_out(), "gauss_newton_step target");
  const Vector r = eval(op, x) - y;
  const Matrix j = jacobian(op, x);
  Vector d;
  try {
    d = solve_square(j, r);
  } catch (const SingularMatrixError&) {
    const double scale = j.squaredNorm();
    if (!(scale > 0.0)) throw SingularJacobianError("gauss_newton_step: Jacobian vanishes");
    const Matrix normal = j.transpose() * j + 1e-10 * scale * Matrix::Identity(j.cols(), j.cols());
    try {
      d = solve_square(normal, j.transpose() * r);
    } catch (const SingularMatrixError&) {
      throw SingularJacobianError("gauss_newton_step: Jacobian singular beyond regularization");
    }
  }
  return x - damping * d;
}

/// Which equation the third-order corrector solves for the step h.
enum class CubicModel {
  ThirdDerivative,  ///< F'''(x)h^3 = y - F(x); from 0 on 6h^3 gives h = (y/6)^{1/3}
  Taylor,           ///< (1/6) F'''(x)h^3 = y - F(x); exact for pure cubics
};

struct CubicStepOptions {
  CubicModel model = CubicModel::ThirdDerivative;
  int starts = 8;
  int max_iters = 200;
  double tol = 1e-12;  ///< relative model residual accepted by the inner solve
  int random_directions = 8;
  std::uint64_t seed = 11;
};

struct CubicStepResult {
  Vector point;
  Vector step;
  bool closed_form = false;
  double model_residual = 0.0;
};

/// Third-order corrector: x + h with F'''(x)h^3 matching the (scaled) defect.
/// Diagonal third derivatives are inverted by sign-preserving cube roots;
/// otherwise a multistart Levenberg-Marquardt solve is run on the cubic model.
inline CubicStepResult cubic_step_detail(const Operator& op, const Vector& y, const Vector& x,
                                         const CubicStepOptions& opts = {}) {
  if (!op.square()) throw UnsupportedError("cubic_step: operator is not square");
  require_dim(y, op.dim_out(), "cubic_step target");
  const Index n = op.dim_in();
  const double scale = opts.model == CubicModel::Taylor ? 6.0 : 1.0;
  const Vector rhs = scale * (y - eval(op, x));

  CubicStepResult out;
  if (rhs.norm() == 0.0) {
    out.point = x;
    out.step = Vector::Zero(n);
    out.closed_form = true;
    return out;
  }

  const auto dirs = sample_unit_directions(n, n > 1 ? opts.random_directions : 0, opts.seed);
  const auto probe = probe_diagonal_third(op, x, dirs);
  if (probe.diagonal && (probe.coeffs.array() != 0.0).all()) {
    Vector h(n);
    for (Index i = 0; i < n; ++i) h(i) = std::cbrt(rhs(i) / probe.coeffs(i));
    out.step = h;
    out.point = x + h;
    out.closed_form = true;
    out.model_residual = (d3_dir(op, x, h) - rhs).norm();
    return out;
  }

  auto model = [&](const Vector& h) { return d3_dir(op, x, h); };
  // Exact Jacobian of the cubic form T by polarization:
  // T'(h)v = (T(h + s v) - T(h - s v)) / (2 s) - s^2 T(v).
  auto model_jacobian = [&](const Vector& h) {
    Matrix jm(n, n);
    const double s = h.norm() > 0.0 ? h.norm() : 1.0;
    for (Index c = 0; c < n; ++c) {
      const Vector v = Vector::Unit(n, c);
      jm.col(c) = (model(h + s * v) - model(h - s * v)) / (2.0 * s) - s * s * model(v);
    }
    return jm;
  };

  std::vector<Vector> starts;
  {
    const Vector u = rhs / rhs.norm();
    const Vector tu = model(u);
    const double denom = tu.squaredNorm();
    if (denom > 0.0) starts.push_back(std::cbrt(tu.dot(rhs) / denom) * u);
    if ((probe.coeffs.array() != 0.0).all()) {
      Vector h(n);
      for (Index i = 0; i < n; ++i) h(i) = std::cbrt(rhs(i) / probe.coeffs(i));
      starts.push_back(h);
    }
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    while (static_cast<int>(starts.size()) < std::max(opts.starts, 1)) {
      Vector v(n);
      for (Index i = 0; i < n; ++i) v(i) = normal(rng);
      const Vector tv = model(v);
      const double radius = tv.norm() > 0.0 ? std::cbrt(rhs.norm() / tv.norm()) : 1.0;
      starts.push_back(radius * v);
    }
  }

  const double target = opts.tol * std::max(1.0, rhs.norm());
  double best_res = std::numeric_limits<double>::infinity();
  Vector best;
  for (const Vector& h0 : starts) {
    Vector h = h0;
    Vector res = model(h) - rhs;
    double lambda = 1e-3;
    for (int it = 0; it < opts.max_iters && res.norm() > target; ++it) {
      const Matrix jm = model_jacobian(h);
      const Matrix jtj = jm.transpose() * jm;
      const Vector jtr = jm.transpose() * res;
      bool improved = false;
      while (lambda < 1e12) {
        Matrix lhs = jtj;
        lhs.diagonal().array() += lambda * (jtj.diagonal().array() + 1e-12);
        const Vector delta = -lhs.ldlt().solve(jtr);
        const Vector trial = h + delta;
        const Vector trial_res = model(trial) - rhs;
        if (delta.allFinite() && trial_res.norm() < res.norm()) {
          h = trial;
          res = trial_res;
          lambda = std::max(lambda / 10.0, 1e-15);
          improved = true;
          break;
        }
        lambda *= 10.0;
      }
      if (!improved) break;
    }
    if (res.norm() < best_res) {
      best_res = res.norm();
      best = h;
    }
    if (best_res <= target) break;
  }
  if (!(best_res <= target)) {
    throw DegenerateSolveError("cubic_step: inner minimization stalled with model residual " +
                               std::to_string(best_res));
  }
  out.step = best;
  out.point = x + best;
  out.model_residual = best_res;
  return out;
}

inline Vector cubic_step(const Operator& op, const Vector& y, const Vector& x, const CubicStepOptions& opts = {}) {
  return cubic_step_detail(op, y, x, opts).point;
}

// ---------------------------------------------------------------------------

enum class SolveStatus { Converged, Stalled, HypothesisViolated };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::Stalled: return "Stalled";
    case SolveStatus::HypothesisViolated: return "HypothesisViolated";
  }
  return "?";
}

struct InvertOptions {
  double tol_res = 1e-9;
  double tol_grad = 1e-10;
  double tol_bij = 1e-8;
  double tol_zero = 1e-8;
  /// Below this sigma_min and second-derivative norm the cubic corrector is tried first.
  double tol_switch = 1e-4;
  int max_iters = 500;
  int starts = 4;  ///< additional seeded random starts after x0
  double start_radius = 2.0;
  std::uint64_t seed = 1;
  bool assume_surjective = false;
  CubicModel cubic_model = CubicModel::Taylor;
  int random_directions = 32;
  int max_backtracks = 60;
  int polish_steps = 3;  ///< Newton steps taken after reaching tol_res

  void validate() const {
    if (!(tol_res > 0 && tol_grad > 0 && tol_bij > 0 && tol_zero > 0 && tol_switch > 0)) {
      throw ConfigError("invert: tolerances must be positive");
    }
    if (max_iters < 1) throw ConfigError("invert: max_iters must be >= 1");
    if (starts < 0) throw ConfigError("invert: starts must be >= 0");
    if (!(start_radius > 0)) throw ConfigError("invert: start_radius must be positive");
    if (random_directions < 0 || max_backtracks < 1 || polish_steps < 0) throw ConfigError("invert: invalid sampling options");
  }

  ClassifyOptions classify_options() const {
    return {tol_bij, tol_zero, assume_surjective, random_directions, seed};
  }
};

struct TraceEntry {
  int iteration = 0;
  double phi = 0.0;
  double grad_norm = 0.0;
};

struct SolveReport {
  Vector solution;
  double residual_norm = 0.0;
  CriticalPointClass class_at_solution;
  int iterations = 0;
  std::vector<TraceEntry> trace;
  SolveStatus status = SolveStatus::Stalled;
  int runs = 0;         ///< starts attempted
  int start_index = 0;  ///< which start produced this report (0 = x0)
  std::uint64_t seed = 0;
  int classified_points = 0;  ///< gradient-small points run through classify_critical
};

namespace detail {

inline SolveReport invert_from(const LeastSquaresFunctional& f, const Vector& x0, const InvertOptions& opts) {
  const Operator& op = f.op();
  const ClassifyOptions ctol = opts.classify_options();
  const auto probe_dirs = sample_unit_directions(op.dim_in(), opts.random_directions, opts.seed);
  CubicStepOptions copts;
  copts.model = opts.cubic_model;
  copts.seed = opts.seed;

  auto safe_phi = [&](const Vector& p) -> double {
    try {
      return phi(f, p);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  SolveReport rep;
  rep.seed = opts.seed;
  Vector x = x0;
  int it = 0;
  for (;; ++it) {
    const Vector r = residual(f, x);
    const double value = 0.5 * f.inner(r, r);
    const Vector g = grad_phi(f, x);
    const double gnorm = f.norm(g);
    rep.trace.push_back({it, value, gnorm});

    if (f.norm(r) <= opts.tol_res) {
      rep.status = SolveStatus::Converged;
      // a few extra Newton steps push the residual well below tol_res
      for (int k = 0; k < opts.polish_steps && f.norm(residual(f, x)) > 1e-3 * opts.tol_res; ++k) {
        Vector next;
        try {
          next = gauss_newton_step(op, f.target(), x);
        } catch (const Error&) {
          break;
        }
        const double v = safe_phi(next);
        if (!(v < rep.trace.back().phi)) break;
        x = next;
        ++it;
        rep.trace.push_back({it, v, f.norm(grad_phi(f, x))});
      }
      break;
    }
    if (it >= opts.max_iters) {
      rep.status = SolveStatus::Stalled;
      break;
    }
    if (gnorm <= opts.tol_grad) {
      ++rep.classified_points;
      if (classify_critical(op, x, ctol).tag == CriticalTag::HypothesisViolated) {
        rep.status = SolveStatus::HypothesisViolated;
        break;
      }
    }

    const Matrix j = jacobian(op, x);
    const double smin = sigma_min(j);
    bool near_degenerate = false;
    if (smin <= opts.tol_switch) {
      double d2 = 0.0;
      for (const Vector& h : probe_dirs) d2 = std::max(d2, d2_dir(op, x, h).norm());
      near_degenerate = d2 <= opts.tol_switch;
    }

    std::vector<Vector> candidates;
    if (near_degenerate) {
      try {
        candidates.push_back(cubic_step(op, f.target(), x, copts));
      } catch (const DegenerateSolveError&) {
      } catch (const NumericalError&) {
      }
    }
    try {
      candidates.push_back(gauss_newton_step(op, f.target(), x));
    } catch (const SingularJacobianError&) {
    } catch (const NumericalError&) {
    }
    candidates.push_back(x - g);

    bool moved = false;
    for (const Vector& cand : candidates) {
      const Vector d = cand - x;
      if (!d.allFinite() || d.norm() == 0.0) continue;
      double t = 1.0;
      for (int b = 0; b < opts.max_backtracks; ++b, t *= 0.5) {
        const Vector trial = x + t * d;
        if (safe_phi(trial) < value) {
          x = trial;
          moved = true;
          break;
        }
      }
      if (moved) break;
    }
    if (!moved) {
      // phi is flat to roundoff here: treat x as a numerical critical point
      ++rep.classified_points;
      rep.status = classify_critical(op, x, ctol).tag == CriticalTag::HypothesisViolated ? SolveStatus::HypothesisViolated
                                                                                         : SolveStatus::Stalled;
      break;
    }
  }
  rep.iterations = it;
  rep.solution = x;
  rep.residual_norm = f.norm(residual(f, x));
  rep.class_at_solution = classify_critical(op, x, ctol);
  return rep;
}

inline int status_rank(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return 2;
    case SolveStatus::HypothesisViolated: return 1;
    case SolveStatus::Stalled: return 0;
  }
  return 0;
}

}  // namespace detail

/// Multistart global inversion. The first start is x0; further starts are drawn
/// uniformly from [-start_radius, start_radius]^n with the seeded generator and
/// only used while no run has converged.
inline SolveReport invert(const Operator& op, const Vector& y, const Vector& x0, const InvertOptions& opts = {}) {
  opts.validate();
  if (!op.square()) throw UnsupportedError("invert: operator is not square");
  require_dim(y, op.dim_out(), "invert target");
  require_dim(x0, op.dim_in(), "invert start");
  const LeastSquaresFunctional f(op, y);

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> uniform(-opts.start_radius, opts.start_radius);

  std::optional<SolveReport> best;
  for (int k = 0; k <= opts.starts; ++k) {
    Vector start = x0;
    if (k > 0) {
      for (Index i = 0; i < start.size(); ++i) start(i) = uniform(rng);
    }
    SolveReport rep = detail::invert_from(f, start, opts);
    rep.start_index = k;
    const bool better =
        !best || detail::status_rank(rep.status) > detail::status_rank(best->status) ||
        (rep.status == best->status && rep.status == SolveStatus::Stalled && rep.trace.back().phi < best->trace.back().phi);
    if (better) best = std::move(rep);
    best->runs = k + 1;
    if (best->status == SolveStatus::Converged) break;
  }
  return *best;
}

struct Certificate {
  bool certified = false;
  double residual_norm = 0.0;
  CriticalPointClass cls;
};

/// Independent re-check of a report: residual below tol_res and the point is
/// Regular or Degenerate.
inline Certificate certify_detail(const Operator& op, const Vector& y, const SolveReport& report,
                                  const InvertOptions& opts = {}) {
  Certificate c;
  const LeastSquaresFunctional f(op, y);
  c.residual_norm = f.norm(residual(f, report.solution));
  c.cls = classify_critical(op, report.solution, opts.classify_options());
  c.certified = c.residual_norm <= opts.tol_res && c.cls.tag != CriticalTag::HypothesisViolated;
  return c;
}

inline bool certify(const Operator& op, const Vector& y, const SolveReport& report, const InvertOptions& opts = {}) {
  return certify_detail(op, y, report, opts).certified;
}

}  // namespace varinv
