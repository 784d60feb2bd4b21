#pragma once

// Mountain-pass machinery: a path-relaxation saddle search, a discrete
// deformation flow, and the injectivity audit built on
//
//   psi(x) = 1/2 |F(x + x1) - F(x2)|^2,
//
// which vanishes at 0 and at x2 - x1 whenever F(x1) = F(x2).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "varinv/errors.hpp"
#include "varinv/functional.hpp"
#include "varinv/inverter.hpp"
#include "varinv/linalg.hpp"
#include "varinv/operator.hpp"

namespace varinv {

inline Functional make_injectivity_functional(const Operator& op, const Vector& x1, const Vector& x2) {
  require_dim(x1, op.dim_in(), "injectivity functional x1");
  require_dim(x2, op.dim_in(), "injectivity functional x2");
  Functional psi = as_functional(LeastSquaresFunctional(shifted(op, x1), eval(op, x2)));
  psi.name = "psi[" + op.name() + "]";
  return psi;
}

// ---------------------------------------------------------------------------
// Barrier bounds around x1.

enum class BarrierBranch { Regular, Degenerate };

struct BarrierBound {
  double ring_bound = 0.0;  ///< 1/8 alpha^2 rho^2 (regular) or 1/8 alpha^2 rho^6 (degenerate)
  double level = 0.0;       ///< the stated mountain-pass level 1/8 alpha^2 rho^2
  int exponent = 2;
  /// The degenerate lower bound is sixth order in rho while the stated level is
  /// quadratic; flagged, not reconciled.
  bool exponent_mismatch = false;
};

inline BarrierBound barrier_bound(double rho, double alpha, BarrierBranch branch) {
  if (!(rho > 0.0)) throw PreconditionError("barrier_bound: rho must be positive");
  if (!(alpha > 0.0)) throw PreconditionError("barrier_bound: alpha must be positive");
  BarrierBound b;
  b.level = 0.125 * alpha * alpha * rho * rho;
  if (branch == BarrierBranch::Regular) {
    b.ring_bound = b.level;
    b.exponent = 2;
  } else {
    b.ring_bound = 0.125 * alpha * alpha * std::pow(rho, 6);
    b.exponent = 6;
    b.exponent_mismatch = true;
  }
  return b;
}

/// Estimates alpha with |F'(x1)h| >= alpha|h| (regular) or |F'''(x1)h^3| >=
/// alpha|h|^3 (degenerate) over sampled unit directions.
inline double estimate_alpha(const Operator& op, const Vector& x1, BarrierBranch branch, int random_directions = 32,
                             std::uint64_t seed = 5) {
  require_dim(x1, op.dim_in(), "estimate_alpha");
  if (branch == BarrierBranch::Regular) {
    const Matrix j = jacobian(op, x1);
    if (op.square()) return sigma_min(j);
    Eigen::BDCSVD<Matrix> svd(j);
    return svd.singularValues().minCoeff();
  }
  double alpha = std::numeric_limits<double>::infinity();
  for (const Vector& h : sample_unit_directions(op.dim_in(), random_directions, seed)) {
    alpha = std::min(alpha, d3_dir(op, x1, h).norm());
  }
  return alpha;
}

// ---------------------------------------------------------------------------
// Path relaxation.

struct PathState {
  std::vector<Vector> nodes;
  std::vector<double> values;
  std::size_t max_index = 0;
};

struct MountainPassOptions {
  int nodes = 33;
  int max_iters = 2000;
  double tol_grad = 1e-9;
  double step_fraction = 0.1;  ///< initial node step as a fraction of the mesh
  int stall_limit = 8;         ///< consecutive non-improving relaxation sweeps
  int polish_iters = 60;
  double geometry_tol = 1e-12;
  bool record_history = false;
};

struct MountainPassReport {
  Vector critical_point;
  double critical_value = 0.0;
  double gradient_norm = 0.0;
  std::size_t path_history_length = 0;
  double barrier_estimate = 0.0;  ///< max over the relaxed path
  int relaxation_iterations = 0;
  int polish_iterations = 0;
  std::vector<double> max_history;  ///< nodal path maximum after every accepted sweep
  std::vector<PathState> history;   ///< only with record_history
  PathState final_path;
};

namespace detail {

inline std::size_t interior_argmax(const std::vector<double>& values) {
  std::size_t k = 1;
  for (std::size_t i = 2; i + 1 < values.size(); ++i) {
    if (values[i] > values[k]) k = i;
  }
  return k;
}

/// Redistributes interior nodes at equal arc length along the polyline; the end
/// nodes are copied untouched.
inline std::vector<Vector> equidistribute(const std::vector<Vector>& nodes) {
  const std::size_t n = nodes.size();
  std::vector<double> arc(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) arc[i] = arc[i - 1] + (nodes[i] - nodes[i - 1]).norm();
  const double total = arc.back();
  std::vector<Vector> out(nodes);
  if (!(total > 0.0)) return out;
  std::size_t seg = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double s = total * static_cast<double>(i) / static_cast<double>(n - 1);
    while (seg + 2 < n && arc[seg + 1] < s) ++seg;
    const double len = arc[seg + 1] - arc[seg];
    const double t = len > 0.0 ? std::clamp((s - arc[seg]) / len, 0.0, 1.0) : 0.0;
    out[i] = (1.0 - t) * nodes[seg] + t * nodes[seg + 1];
  }
  return out;
}

/// Golden-section maximization of f on the segment [a, b].
inline Vector golden_max(const Functional& f, const Vector& a, const Vector& b, int iters = 200) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = 1.0;
  auto at = [&](double t) { return Vector((1.0 - t) * a + t * b); };
  double c = hi - inv_phi * (hi - lo), d = lo + inv_phi * (hi - lo);
  double fc = f.value(at(c)), fd = f.value(at(d));
  for (int i = 0; i < iters && hi - lo > 1e-15; ++i) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f.value(at(c));
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f.value(at(d));
    }
  }
  return at(0.5 * (lo + hi));
}

inline Matrix fd_hessian(const Functional& f, const Vector& x) {
  const Index n = x.size();
  Matrix h(n, n);
  const double eps = 1e-5 * std::max(1.0, x.norm());
  for (Index c = 0; c < n; ++c) {
    Vector xp = x, xm = x;
    xp(c) += eps;
    xm(c) -= eps;
    h.col(c) = (f.gradient(xp) - f.gradient(xm)) / (xp(c) - xm(c));
  }
  return 0.5 * (h + h.transpose());
}

}  // namespace detail

/// Highest-node path relaxation between `anchor_a` and `anchor_b`, followed by
/// a line maximization along the path and a Newton polish of grad f = 0.
inline MountainPassReport mountain_pass(const Functional& f, const Vector& anchor_a, const Vector& anchor_b,
                                        const MountainPassOptions& opts = {}) {
  require_dim(anchor_a, f.dim, "mountain_pass anchor");
  require_dim(anchor_b, f.dim, "mountain_pass anchor");
  if (opts.nodes < 8) throw PreconditionError("mountain_pass: need at least 8 nodes");
  if (!(opts.tol_grad > 0.0) || opts.max_iters < 0) throw ConfigError("mountain_pass: invalid options");

  const std::size_t n = static_cast<std::size_t>(opts.nodes);
  PathState path;
  path.nodes.resize(n);
  path.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    path.nodes[i] = (1.0 - t) * anchor_a + t * anchor_b;
  }
  path.nodes.front() = anchor_a;
  path.nodes.back() = anchor_b;
  for (std::size_t i = 0; i < n; ++i) path.values[i] = f.value(path.nodes[i]);
  const double anchor_level = std::max(path.values.front(), path.values.back());

  path.max_index = detail::interior_argmax(path.values);
  if ((anchor_b - anchor_a).norm() == 0.0 ||
      !(path.values[path.max_index] > anchor_level + opts.geometry_tol)) {
    throw GeometryError("mountain_pass: path maximum does not exceed the anchors (no barrier)");
  }

  MountainPassReport rep;
  rep.max_history.push_back(path.values[path.max_index]);
  if (opts.record_history) rep.history.push_back(path);

  // Relaxation: lower the top node, re-equidistribute, keep the nodal maximum monotone.
  int stalls = 0;
  Vector top_grad;
  for (int it = 0; it < opts.max_iters && stalls < opts.stall_limit; ++it) {
    const std::size_t k = path.max_index;
    top_grad = f.gradient(path.nodes[k]);
    const double gnorm = top_grad.norm();
    if (gnorm <= opts.tol_grad) break;
    ++rep.relaxation_iterations;

    double length = 0.0;
    for (std::size_t i = 1; i < n; ++i) length += (path.nodes[i] - path.nodes[i - 1]).norm();
    double step = opts.step_fraction * length / static_cast<double>(n - 1);
    Vector moved;
    bool lowered = false;
    for (int b = 0; b < 40; ++b, step *= 0.5) {
      moved = path.nodes[k] - step * top_grad / gnorm;
      if (f.value(moved) < path.values[k]) {
        lowered = true;
        break;
      }
    }
    if (!lowered) {
      ++stalls;
      continue;
    }
    std::vector<Vector> trial_nodes = path.nodes;
    trial_nodes[k] = moved;
    trial_nodes = detail::equidistribute(trial_nodes);
    trial_nodes.front() = anchor_a;
    trial_nodes.back() = anchor_b;
    std::vector<double> trial_values(n);
    for (std::size_t i = 0; i < n; ++i) trial_values[i] = f.value(trial_nodes[i]);
    const std::size_t trial_max = detail::interior_argmax(trial_values);
    const double old_max = path.values[path.max_index];
    if (trial_values[trial_max] > old_max) {
      ++stalls;
      continue;
    }
    stalls = trial_values[trial_max] < old_max - 1e-14 * (1.0 + std::abs(old_max)) ? 0 : stalls + 1;
    path.nodes = std::move(trial_nodes);
    path.values = std::move(trial_values);
    path.max_index = trial_max;
    rep.max_history.push_back(path.values[path.max_index]);
    if (opts.record_history) rep.history.push_back(path);
  }
  rep.barrier_estimate = path.values[path.max_index];

  // Line maximum around the top node.
  const std::size_t k = path.max_index;
  Vector x = path.nodes[k];
  double fx = path.values[k];
  for (std::size_t seg : {k - 1, k}) {
    const Vector p = detail::golden_max(f, path.nodes[seg], path.nodes[seg + 1]);
    const double fp = f.value(p);
    if (fp > fx) {
      x = p;
      fx = fp;
    }
  }

  // Newton polish on grad f = 0.
  Vector g = f.gradient(x);
  for (int it = 0; it < opts.polish_iters && g.norm() > opts.tol_grad; ++it) {
    ++rep.polish_iterations;
    const Matrix h = detail::fd_hessian(f, x);
    Vector d;
    try {
      d = -solve_square(h, g);
    } catch (const Error&) {
      d = -h.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(g);
    }
    bool improved = false;
    double t = 1.0;
    for (int b = 0; b < 40; ++b, t *= 0.5) {
      const Vector trial = x + t * d;
      const Vector tg = f.gradient(trial);
      if (tg.allFinite() && tg.norm() < g.norm()) {
        x = trial;
        g = tg;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }

  rep.critical_point = x;
  rep.critical_value = f.value(x);
  rep.gradient_norm = g.norm();
  rep.path_history_length = rep.max_history.size();
  rep.final_path = path;
  if (rep.gradient_norm > opts.tol_grad) {
    throw StallError("mountain_pass: gradient norm " + std::to_string(rep.gradient_norm) +
                     " above tolerance after polish");
  }
  if (rep.critical_value < anchor_level - opts.geometry_tol) {
    throw StallError("mountain_pass: polish left the barrier (critical value below anchors)");
  }
  return rep;
}

/// Path from the origin to `anchor_e`.
inline MountainPassReport mountain_pass(const Functional& f, const Vector& anchor_e,
                                        const MountainPassOptions& opts = {}) {
  return mountain_pass(f, Vector::Zero(anchor_e.size()), anchor_e, opts);
}

// ---------------------------------------------------------------------------
// Discrete deformation.

struct DeformOptions {
  double tol_grad = 1e-10;
  double flow_length = 1.0;  ///< arc-length budget of the whole flow
  int max_halvings = 60;
};

struct DeformationTrace {
  std::vector<double> times;
  std::vector<Vector> points;
  std::vector<double> values;
  bool frozen = false;
};

using FrozenPredicate = std::function<bool(const Vector&)>;

/// eta(t_k, x) at t_k = k/steps: constant when x is frozen or critical,
/// otherwise normalized gradient descent whose steps never increase f and
/// strictly decrease it on the first step.
inline DeformationTrace deform(const Functional& f, const FrozenPredicate& frozen, const Vector& x, int steps,
                               const DeformOptions& opts = {}) {
  require_dim(x, f.dim, "deform");
  if (steps < 1) throw PreconditionError("deform: steps must be >= 1");
  DeformationTrace trace;
  trace.times.reserve(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) trace.times.push_back(static_cast<double>(k) / steps);

  const double f0 = f.value(x);
  const bool is_frozen = (frozen && frozen(x)) || f.gradient(x).norm() <= opts.tol_grad;
  trace.frozen = is_frozen;
  trace.points.assign(static_cast<std::size_t>(steps) + 1, x);
  trace.values.assign(static_cast<std::size_t>(steps) + 1, f0);
  if (is_frozen) return trace;

  Vector current = x;
  double value = f0;
  bool halted = false;
  const double base_step = opts.flow_length / steps;
  for (int k = 1; k <= steps; ++k) {
    if (!halted) {
      const Vector g = f.gradient(current);
      const double gnorm = g.norm();
      bool moved = false;
      if (gnorm > opts.tol_grad) {
        double step = base_step;
        for (int b = 0; b < opts.max_halvings; ++b, step *= 0.5) {
          const Vector trial = current - step * g / gnorm;
          const double tv = f.value(trial);
          if (tv < value) {
            current = trial;
            value = tv;
            moved = true;
            break;
          }
        }
      }
      if (!moved) {
        if (k == 1) throw NumericalError("deform: step control failed to decrease the functional");
        halted = true;
      }
    }
    trace.points[static_cast<std::size_t>(k)] = current;
    trace.values[static_cast<std::size_t>(k)] = value;
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Injectivity audit.

enum class AuditVerdict { NotACollision, CollisionConsistent, HypothesisContradiction };

inline const char* to_string(AuditVerdict v) {
  switch (v) {
    case AuditVerdict::NotACollision: return "NotACollision";
    case AuditVerdict::CollisionConsistent: return "CollisionConsistent";
    case AuditVerdict::HypothesisContradiction: return "HypothesisContradiction";
  }
  return "?";
}

struct AuditOptions {
  double tol_res = 1e-9;
  double tol_value = 1e-12;  ///< psi values above this count as positive
  MountainPassOptions mountain_pass;
  ClassifyOptions classify;
};

struct AuditCriticalPoint {
  Vector point;  ///< in the coordinates of F, i.e. x* + x1
  double psi_value = 0.0;
  double residual = 0.0;  ///< |F(point) - F(x2)|
  CriticalPointClass cls;
};

struct AuditReport {
  AuditVerdict verdict = AuditVerdict::NotACollision;
  double gap = 0.0;  ///< |F(x1) - F(x2)|
  std::vector<AuditCriticalPoint> critical_points;
  std::optional<MountainPassReport> mountain_pass;
  std::optional<BarrierBound> barrier;
};

inline AuditReport injectivity_audit(const Operator& op, const Vector& x1, const Vector& x2,
                                     const AuditOptions& opts = {}) {
  require_dim(x1, op.dim_in(), "injectivity_audit x1");
  require_dim(x2, op.dim_in(), "injectivity_audit x2");
  if ((x1 - x2).norm() == 0.0) throw DegenerateInputError("injectivity_audit: x1 and x2 coincide");

  AuditReport rep;
  const Vector f2 = eval(op, x2);
  rep.gap = (eval(op, x1) - f2).norm();
  if (rep.gap > opts.tol_res) {
    rep.verdict = AuditVerdict::NotACollision;
    return rep;
  }

  const Functional psi = make_injectivity_functional(op, x1, x2);
  const Vector e = x2 - x1;
  rep.mountain_pass = mountain_pass(psi, e, opts.mountain_pass);

  AuditCriticalPoint cp;
  cp.point = rep.mountain_pass->critical_point + x1;
  cp.psi_value = rep.mountain_pass->critical_value;
  cp.residual = (eval(op, cp.point) - f2).norm();
  cp.cls = classify_critical(op, cp.point, opts.classify);
  const bool positive = cp.psi_value > opts.tol_value;
  const bool hypothesis_holds = cp.cls.tag != CriticalTag::HypothesisViolated;
  rep.verdict = positive && hypothesis_holds ? AuditVerdict::HypothesisContradiction
                                             : AuditVerdict::CollisionConsistent;
  rep.critical_points.push_back(cp);

  // Reference barrier from the local behaviour at x1, when it is nondegenerate.
  const CriticalPointClass at_x1 = classify_critical(op, x1, opts.classify);
  const BarrierBranch branch = at_x1.tag == CriticalTag::Regular ? BarrierBranch::Regular : BarrierBranch::Degenerate;
  const double alpha = estimate_alpha(op, x1, branch);
  if (alpha > 0.0) rep.barrier = barrier_bound(0.5 * e.norm(), alpha, branch);
  return rep;
}

}  // namespace varinv
