#pragma once

// Evidence for the Palais-Smale hypothesis on phi_y: growth exponents of
// phi_y along rays, and a budgeted search for bounded-value, small-gradient
// points far from the origin. Neither is a proof.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "varinv/errors.hpp"
#include "varinv/functional.hpp"
#include "varinv/linalg.hpp"
#include "varinv/operator.hpp"

namespace varinv {

/// `count` geometrically spaced radii from `lo` to `hi`.
inline std::vector<double> geometric_radii(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi > lo) || count < 2) throw ConfigError("geometric_radii: need 0 < lo < hi, count >= 2");
  std::vector<double> r(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    r[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  }
  r.back() = hi;
  return r;
}

/// Least-squares slope of log(value) against log(radius) over the radii in the
/// top decade [r_max/10, r_max]. Non-positive or non-finite values are skipped;
/// returns NaN with fewer than two usable points.
inline double fit_growth_exponent(std::span<const double> radii, std::span<const double> values) {
  if (radii.size() != values.size() || radii.empty()) throw DimensionError("fit_growth_exponent: size mismatch");
  const double r_max = *std::max_element(radii.begin(), radii.end());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (radii[i] < r_max / 10.0 * (1.0 - 1e-12)) continue;
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) continue;
    const double lx = std::log(radii[i]), ly = std::log(values[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  const double denom = m * sxx - sx * sx;
  if (!(denom > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return (m * sxy - sx * sy) / denom;
}

struct GrowthOptions {
  int n_directions = 64;
  std::vector<double> radii = geometric_radii(1.0, 1e3, 16);
  std::uint64_t seed = 3;
};

struct GrowthReport {
  std::vector<Vector> directions;
  std::vector<double> radii;
  std::vector<double> fitted_exponent;  ///< per direction
  double min_exponent = 0.0;
  double min_value_at_max_radius = 0.0;
  double max_value_at_min_radius = 0.0;
  bool coercive_flag = false;
  std::vector<std::string> warnings;
};

/// Fits the growth exponent of phi_y(r d) for signed basis directions plus
/// seeded random unit directions (random ones only when dim > 1).
inline GrowthReport ray_growth(const Operator& op, const Vector& y, const GrowthOptions& opts = {}) {
  const auto& radii = opts.radii;
  if (radii.size() < 2) throw PreconditionError("ray_growth: need at least two radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0) || (i > 0 && !(radii[i] > radii[i - 1]))) {
      throw PreconditionError("ray_growth: radii must be positive and increasing");
    }
  }
  const double ratio = radii[1] / radii[0];
  for (std::size_t i = 2; i < radii.size(); ++i) {
    if (std::abs(radii[i] / radii[i - 1] - ratio) > 1e-9 * ratio) throw PreconditionError("ray_growth: radii not geometric");
  }
  if (radii.back() / radii.front() < 1e3 * (1.0 - 1e-12)) {
    throw PreconditionError("ray_growth: radii must span at least three decades");
  }

  const LeastSquaresFunctional f(op, y);
  const Index dim = op.dim_in();
  const int n_random = dim > 1 ? std::max(0, opts.n_directions - static_cast<int>(2 * dim)) : 0;

  GrowthReport rep;
  rep.radii = radii;
  rep.directions = sample_unit_directions(dim, n_random, opts.seed);
  rep.min_exponent = std::numeric_limits<double>::infinity();
  rep.min_value_at_max_radius = std::numeric_limits<double>::infinity();
  rep.max_value_at_min_radius = 0.0;

  for (std::size_t d = 0; d < rep.directions.size(); ++d) {
    const Vector& dir = rep.directions[d];
    std::vector<double> values(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i) {
      double v = std::numeric_limits<double>::quiet_NaN();
      try {
        v = phi(f, radii[i] * dir);
      } catch (const NumericalError&) {
      }
      if (!std::isfinite(v)) {
        rep.warnings.push_back("overflow clipped at radius " + std::to_string(radii[i]) + " in direction " +
                               std::to_string(d));
      }
      values[i] = v;
    }
    const double slope = fit_growth_exponent(radii, values);
    rep.fitted_exponent.push_back(slope);
    if (std::isfinite(slope)) rep.min_exponent = std::min(rep.min_exponent, slope);
    // a clipped top radius counts as unbounded growth
    const double top = std::isfinite(values.back()) ? values.back() : std::numeric_limits<double>::infinity();
    rep.min_value_at_max_radius = std::min(rep.min_value_at_max_radius, top);
    if (std::isfinite(values.front())) rep.max_value_at_min_radius = std::max(rep.max_value_at_min_radius, values.front());
  }
  if (!std::isfinite(rep.min_exponent)) rep.min_exponent = std::numeric_limits<double>::quiet_NaN();
  rep.coercive_flag = rep.min_value_at_max_radius > rep.max_value_at_min_radius && rep.min_exponent > 0.0;
  return rep;
}

// ---------------------------------------------------------------------------

struct PSProbeOptions {
  double box_radius = 1e3;
  double norm_blowup = 1e2;  ///< candidates must lie at least this far out
  double grad_tol = 1e-4;
  double phi_bound = 1e8;    ///< "bounded value" cut-off
  int starts = 32;
  int max_iters = 200;
  std::uint64_t seed = 9;
};

struct PSCandidate {
  Vector point;
  double phi = 0.0;
  double grad_norm = 0.0;
};

struct PSProbeReport {
  std::vector<PSCandidate> candidate_sequences;  ///< best point of each start
  bool violation_found = false;
  double max_norm_at_small_gradient = 0.0;
  PSCandidate strongest;  ///< the violating (or smallest-gradient) candidate
};

/// Minimizes m(x) = 1/2 |grad f(x)|^2 from far-out seeded starts. A point with
/// |grad f| <= grad_tol, f <= phi_bound and |x| >= norm_blowup is reported as
/// a would-be Palais-Smale violation.
inline PSProbeReport ps_probe(const Functional& f, const PSProbeOptions& opts = {}) {
  if (!(opts.box_radius > opts.norm_blowup && opts.norm_blowup > 0.0 && opts.grad_tol > 0.0)) {
    throw ConfigError("ps_probe: need box_radius > norm_blowup > 0 and grad_tol > 0");
  }
  PSProbeReport rep;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> radius(opts.norm_blowup, opts.box_radius);

  auto is_violation = [&](const PSCandidate& c) {
    return c.grad_norm <= opts.grad_tol && c.phi <= opts.phi_bound && c.point.norm() >= opts.norm_blowup;
  };
  auto consider = [&](const PSCandidate& c) {
    if (c.grad_norm <= opts.grad_tol) rep.max_norm_at_small_gradient = std::max(rep.max_norm_at_small_gradient, c.point.norm());
    if (is_violation(c)) {
      if (!rep.violation_found || c.point.norm() > rep.strongest.point.norm()) rep.strongest = c;
      rep.violation_found = true;
    } else if (!rep.violation_found &&
               (rep.strongest.point.size() == 0 || c.grad_norm < rep.strongest.grad_norm)) {
      rep.strongest = c;
    }
  };

  // basis directions first so that 1-D problems probe both tails
  std::vector<Vector> dirs = sample_unit_directions(f.dim, std::max(0, opts.starts - static_cast<int>(2 * f.dim)), opts.seed);
  for (const Vector& dir : dirs) {
    Vector x = radius(rng) * dir;
    auto sample = [&](const Vector& p) -> PSCandidate {
      const Vector g = f.gradient(p);
      return {p, f.value(p), g.norm()};
    };
    PSCandidate cur = sample(x);
    consider(cur);
    PSCandidate best = cur;
    for (int it = 0; it < opts.max_iters; ++it) {
      const Vector g = f.gradient(x);
      const double gn = g.norm();
      if (!(gn > 0.0) || !std::isfinite(gn)) break;
      const double eps = 1e-6 * std::max(1.0, x.norm());
      const Vector u = g / gn;
      // grad m = H g, by central differences of the gradient along g
      const Vector hg = (f.gradient(x + eps * u) - f.gradient(x - eps * u)) / (2.0 * eps) * gn;
      const double hn = hg.norm();
      if (!(hn > 0.0) || !hg.allFinite()) break;
      double step = 0.1 * std::max(1.0, x.norm());
      bool moved = false;
      for (int b = 0; b < 50; ++b, step *= 0.5) {
        Vector trial = x - step * hg / hn;
        if (trial.norm() > opts.box_radius) trial *= opts.box_radius / trial.norm();
        const Vector tg = f.gradient(trial);
        if (tg.allFinite() && tg.norm() < gn) {
          x = trial;
          moved = true;
          break;
        }
      }
      if (!moved) break;
      cur = sample(x);
      consider(cur);
      if (cur.grad_norm < best.grad_norm) best = cur;
    }
    rep.candidate_sequences.push_back(best);
  }
  return rep;
}

}  // namespace varinv
