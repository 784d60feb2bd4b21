#pragma once

// Least-squares functional phi_y(x) = 1/2 |F(x) - y|^2 and its directional
// derivatives:
//
//   phi'(x)h    = <F(x)-y, F'(x)h>
//   phi''(x)h^2 = |F'(x)h|^2 + <F(x)-y, F''(x)h^2>
//   phi'''(x)h^3 = 3<F'(x)h, F''(x)h^2> + <F(x)-y, F'''(x)h^3>
//
// Pairings use the operator's weights when it carries them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "varinv/errors.hpp"
#include "varinv/linalg.hpp"
#include "varinv/operator.hpp"

namespace varinv {

/// A scalar C^1 functional on R^n given by value and gradient.
struct Functional {
  std::string name;
  Index dim = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

class LeastSquaresFunctional {
 public:
  LeastSquaresFunctional(Operator op, Vector target) : op_(std::move(op)), target_(std::move(target)) {
    require_dim(target_, op_.dim_out(), "least-squares target");
    if (!target_.allFinite()) throw NumericalError("least-squares target is not finite");
  }

  const Operator& op() const { return op_; }
  const Vector& target() const { return target_; }

  double inner(const Vector& u, const Vector& v) const { return weighted_dot(u, v, op_.weights()); }
  double norm(const Vector& v) const { return std::sqrt(inner(v, v)); }

 private:
  Operator op_;
  Vector target_;
};

inline Vector residual(const LeastSquaresFunctional& f, const Vector& x) {
  return eval(f.op(), x) - f.target();
}

inline double phi(const LeastSquaresFunctional& f, const Vector& x) {
  const Vector r = residual(f, x);
  return 0.5 * f.inner(r, r);
}

/// Riesz representative of h -> <F(x)-y, F'(x)h> in the operator's inner
/// product: W^{-1} J^T W r (plain J^T r without weights).
inline Vector grad_phi(const LeastSquaresFunctional& f, const Vector& x) {
  const Vector r = residual(f, x);
  const Matrix j = jacobian(f.op(), x);
  const Vector& w = f.op().weights();
  if (w.size() == 0) return j.transpose() * r;
  Vector wr = w.array() * r.array();
  Vector g = j.transpose() * wr;
  return g.array() / w.array();
}

inline double phi_d2_dir(const LeastSquaresFunctional& f, const Vector& x, const Vector& h) {
  require_dim(h, f.op().dim_in(), "phi_d2_dir direction");
  const Vector r = residual(f, x);
  const Vector jh = jacobian(f.op(), x) * h;
  return f.inner(jh, jh) + f.inner(r, d2_dir(f.op(), x, h));
}

inline double phi_d3_dir(const LeastSquaresFunctional& f, const Vector& x, const Vector& h) {
  require_dim(h, f.op().dim_in(), "phi_d3_dir direction");
  const Vector r = residual(f, x);
  const Vector jh = jacobian(f.op(), x) * h;
  return 3.0 * f.inner(jh, d2_dir(f.op(), x, h)) + f.inner(r, d3_dir(f.op(), x, h));
}

inline Functional as_functional(const LeastSquaresFunctional& f) {
  auto shared = std::make_shared<const LeastSquaresFunctional>(f);
  return {"phi[" + f.op().name() + "]", f.op().dim_in(),
          [shared](const Vector& x) { return phi(*shared, x); },
          [shared](const Vector& x) { return grad_phi(*shared, x); }};
}

// ---------------------------------------------------------------------------
// Taylor diagnostic around a critical point.

struct TaylorOptions {
  int samples = 64;           // radii per direction, in [radius/100, radius]
  int random_directions = 4;  // on top of the signed basis directions
  std::uint64_t seed = 20240611;
  double critical_tol = 1e-8;  // |grad phi| bound for the precondition
};

struct TaylorReport {
  /// Fitted coefficients c_1..c_6 of phi(x*+s d) - phi(x*) = sum c_k s^k, for
  /// the direction with the largest |c_3|.
  std::vector<double> coefficients;
  double cubic_coefficient = 0.0;      ///< max over directions of |c_3|
  double quadratic_coefficient = 0.0;  ///< min over directions of c_2
  bool sign_change = false;            ///< sampled differences take both signs
  bool local_min = false;              ///< no sampled difference below -tol
  double min_difference = 0.0;
  int directions = 0;
};

/// Fits phi(x* + s d) - phi(x*) by a polynomial of degree <= 6 without constant
/// term over s in +-[radius/100, radius] along each probing direction.
inline TaylorReport taylor_check(const LeastSquaresFunctional& f, const Vector& x_star, double radius,
                                 const TaylorOptions& opts = {}) {
  require_dim(x_star, f.op().dim_in(), "taylor_check");
  if (!(radius > 0.0)) throw PreconditionError("taylor_check: radius must be positive");
  if (opts.samples < 8) throw PreconditionError("taylor_check: need at least 8 samples");
  const double gnorm = f.norm(grad_phi(f, x_star));
  if (gnorm > opts.critical_tol) {
    throw PreconditionError("taylor_check: x_star is not a critical point (|grad phi| = " +
                            std::to_string(gnorm) + ")");
  }
  constexpr int kDegree = 6;
  const double base = phi(f, x_star);
  const auto dirs = sample_unit_directions(f.op().dim_in(), f.op().dim_in() > 1 ? opts.random_directions : 0,
                                           opts.seed);

  TaylorReport report;
  report.quadratic_coefficient = std::numeric_limits<double>::infinity();
  report.cubic_coefficient = -1.0;
  double max_diff = 0.0;
  double min_diff = 0.0;
  double scale = std::abs(base);

  const int rows = 2 * opts.samples;
  for (const Vector& d : dirs) {
    Matrix design(rows, kDegree);
    Vector rhs(rows);
    for (int k = 0; k < opts.samples; ++k) {
      // geometric spacing resolves the small-s behaviour
      const double s = radius * std::pow(100.0, -1.0 + static_cast<double>(k) / (opts.samples - 1));
      for (int sign = 0; sign < 2; ++sign) {
        const double ss = sign == 0 ? s : -s;
        const int row = 2 * k + sign;
        const double u = ss / radius;
        for (int p = 0; p < kDegree; ++p) design(row, p) = std::pow(u, p + 1);
        const double diff = phi(f, x_star + ss * d) - base;
        rhs(row) = diff;
        max_diff = std::max(max_diff, diff);
        min_diff = std::min(min_diff, diff);
        scale = std::max(scale, std::abs(diff));
      }
    }
    const Vector scaled = design.colPivHouseholderQr().solve(rhs);
    std::vector<double> coeffs(kDegree);
    for (int p = 0; p < kDegree; ++p) coeffs[p] = scaled(p) / std::pow(radius, p + 1);
    report.quadratic_coefficient = std::min(report.quadratic_coefficient, coeffs[1]);
    if (std::abs(coeffs[2]) > report.cubic_coefficient) {
      report.cubic_coefficient = std::abs(coeffs[2]);
      report.coefficients = coeffs;
    }
  }
  const double tol = 1e-12 * std::max(1.0, scale);
  report.min_difference = min_diff;
  report.local_min = min_diff >= -tol;
  report.sign_change = min_diff < -tol && max_diff > tol;
  report.directions = static_cast<int>(dirs.size());
  return report;
}

// ---------------------------------------------------------------------------
// Benchmark functionals with known mountain-pass geometry.

/// f(x) = (x^2 - 1)^2: minima at +-1, saddle value 1 at 0.
inline Functional two_well_1d() {
  return {"two-well", 1,
          [](const Vector& x) { return std::pow(x(0) * x(0) - 1.0, 2); },
          [](const Vector& x) { return Vector::Constant(1, 4.0 * x(0) * (x(0) * x(0) - 1.0)); }};
}

/// f(x) = (x1^2 - 1)^2 + x2^2: minima (+-1, 0), saddle (0, 0) with value 1.
inline Functional two_well_2d() {
  return {"two-well-2d", 2,
          [](const Vector& x) { return std::pow(x(0) * x(0) - 1.0, 2) + x(1) * x(1); },
          [](const Vector& x) {
            Vector g(2);
            g << 4.0 * x(0) * (x(0) * x(0) - 1.0), 2.0 * x(1);
            return g;
          }};
}

/// f(x) = (x1^2 - 1)^2 + 2 (x2 - (1 - x1^2)/2)^2: minima (+-1, 0), saddle at
/// (0, 1/2) with value 1; the straight segment between the minima peaks at 1.5.
inline Functional curved_two_well() {
  return {"curved-two-well", 2,
          [](const Vector& x) {
            const double bend = x(1) - 0.5 * (1.0 - x(0) * x(0));
            return std::pow(x(0) * x(0) - 1.0, 2) + 2.0 * bend * bend;
          },
          [](const Vector& x) {
            const double bend = x(1) - 0.5 * (1.0 - x(0) * x(0));
            Vector g(2);
            g << 4.0 * x(0) * (x(0) * x(0) - 1.0) + 4.0 * bend * x(0), 4.0 * bend;
            return g;
          }};
}

inline Functional benchmark_functional(const std::string& name) {
  if (name == "two-well") return two_well_1d();
  if (name == "two-well-2d") return two_well_2d();
  if (name == "curved-two-well") return curved_two_well();
  throw ConfigError("unknown benchmark functional '" + name + "'");
}

}  // namespace varinv
