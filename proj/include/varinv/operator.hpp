#pragma once

// Differentiable maps F: R^n -> R^m with derivatives up to order three.
//
// Higher derivatives are only exposed on the diagonal: F''(x)h^2 and
// F'''(x)h^3. Any derivative callback that is not supplied falls back to a
// central finite-difference stencil.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "varinv/errors.hpp"
#include "varinv/linalg.hpp"

namespace varinv {

enum class DerivativeMode { Analytic, FiniteDifference };

/// Relative step sizes of the finite-difference fallbacks. The effective step
/// is `step * max(1, |x|)`; third-order stencils need the larger step to keep
/// roundoff below truncation error.
struct FiniteDifferenceSteps {
  double first = 1e-6;
  double second = 1e-4;
  double third = 1e-3;
};

class Operator {
 public:
  using Map = std::function<Vector(const Vector&)>;
  using JacobianMap = std::function<Matrix(const Vector&)>;
  using DirectionalMap = std::function<Vector(const Vector&, const Vector&)>;

  Operator(std::string name, Index dim_in, Index dim_out, Map eval)
      : name_(std::move(name)), dim_in_(dim_in), dim_out_(dim_out), eval_(std::move(eval)) {
    if (dim_in_ < 1 || dim_out_ < 1) throw ConfigError("operator dimensions must be positive");
    if (!eval_) throw ConfigError("operator requires an evaluation map");
  }

  Operator& with_jacobian(JacobianMap f) {
    jacobian_ = std::move(f);
    return *this;
  }
  Operator& with_second(DirectionalMap f) {
    second_ = std::move(f);
    return *this;
  }
  Operator& with_third(DirectionalMap f) {
    third_ = std::move(f);
    return *this;
  }
  Operator& with_steps(FiniteDifferenceSteps steps) {
    steps_ = steps;
    return *this;
  }
  /// Positive weights defining the inner product on both domain and range
  /// (discrete L2 structure). Requires a square operator.
  Operator& with_weights(Vector weights) {
    if (dim_in_ != dim_out_ || weights.size() != dim_out_) {
      throw DimensionError("operator weights need a square operator and matching length");
    }
    if ((weights.array() <= 0.0).any()) throw ConfigError("operator weights must be positive");
    weights_ = std::move(weights);
    return *this;
  }

  const std::string& name() const { return name_; }
  Index dim_in() const { return dim_in_; }
  Index dim_out() const { return dim_out_; }
  bool square() const { return dim_in_ == dim_out_; }
  const Vector& weights() const { return weights_; }
  const FiniteDifferenceSteps& steps() const { return steps_; }

  DerivativeMode mode() const {
    return (jacobian_ && second_ && third_) ? DerivativeMode::Analytic
                                            : DerivativeMode::FiniteDifference;
  }
  bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }
  bool has_analytic_second() const { return static_cast<bool>(second_); }
  bool has_analytic_third() const { return static_cast<bool>(third_); }

  const Map& raw_eval() const { return eval_; }
  const JacobianMap& raw_jacobian() const { return jacobian_; }
  const DirectionalMap& raw_second() const { return second_; }
  const DirectionalMap& raw_third() const { return third_; }

  /// Same operator with analytic derivative callbacks removed.
  Operator finite_difference_only() const {
    Operator copy(name_ + "[fd]", dim_in_, dim_out_, eval_);
    copy.steps_ = steps_;
    copy.weights_ = weights_;
    return copy;
  }

 private:
  std::string name_;
  Index dim_in_;
  Index dim_out_;
  Map eval_;
  JacobianMap jacobian_;
  DirectionalMap second_;
  DirectionalMap third_;
  FiniteDifferenceSteps steps_;
  Vector weights_;
};

namespace detail {

inline Vector checked(const Vector& v, Index dim, const char* what) {
  if (v.size() != dim) throw DimensionError(std::string(what) + ": callback returned wrong dimension");
  if (!v.allFinite()) throw NumericalError(std::string(what) + ": non-finite output");
  return v;
}

/// Parameter step t for a stencil x + t*h so that the spatial step is
/// rel * max(1, |x|).
inline double stencil_step(double rel, const Vector& x, const Vector& h) {
  const double t = rel * std::max(1.0, x.norm()) / h.norm();
  if (!(t > 0.0) || !std::isfinite(t)) throw NumericalError("finite-difference step underflow");
  if (((x + t * h).array() == x.array()).all()) {
    throw NumericalError("finite-difference step underflow: x + t*h == x");
  }
  return t;
}

}  // namespace detail

inline Vector eval(const Operator& op, const Vector& x) {
  require_dim(x, op.dim_in(), "eval");
  return detail::checked(op.raw_eval()(x), op.dim_out(), "eval");
}

/// F'(x) as a dim_out x dim_in matrix.
inline Matrix jacobian(const Operator& op, const Vector& x) {
  require_dim(x, op.dim_in(), "jacobian");
  if (op.has_analytic_jacobian()) {
    Matrix j = op.raw_jacobian()(x);
    if (j.rows() != op.dim_out() || j.cols() != op.dim_in()) {
      throw DimensionError("jacobian: callback returned wrong shape");
    }
    if (!j.allFinite()) throw NumericalError("jacobian: non-finite output");
    return j;
  }
  Matrix j(op.dim_out(), op.dim_in());
  for (Index c = 0; c < op.dim_in(); ++c) {
    const double step = op.steps().first * std::max(1.0, std::abs(x(c)));
    Vector xp = x, xm = x;
    xp(c) += step;
    xm(c) -= step;
    const double width = xp(c) - xm(c);
    if (!(width > 0.0)) throw NumericalError("jacobian: finite-difference step underflow");
    j.col(c) = (eval(op, xp) - eval(op, xm)) / width;
  }
  return j;
}

/// F''(x)h^2.
inline Vector d2_dir(const Operator& op, const Vector& x, const Vector& h) {
  require_dim(x, op.dim_in(), "d2_dir");
  require_dim(h, op.dim_in(), "d2_dir direction");
  if (op.has_analytic_second()) return detail::checked(op.raw_second()(x, h), op.dim_out(), "d2_dir");
  if (h.norm() == 0.0) return Vector::Zero(op.dim_out());
  const double t = detail::stencil_step(op.steps().second, x, h);
  const Vector fp = eval(op, x + t * h);
  const Vector f0 = eval(op, x);
  const Vector fm = eval(op, x - t * h);
  return (fp - 2.0 * f0 + fm) / (t * t);
}

/// F'''(x)h^3.
inline Vector d3_dir(const Operator& op, const Vector& x, const Vector& h) {
  require_dim(x, op.dim_in(), "d3_dir");
  require_dim(h, op.dim_in(), "d3_dir direction");
  if (op.has_analytic_third()) return detail::checked(op.raw_third()(x, h), op.dim_out(), "d3_dir");
  if (h.norm() == 0.0) return Vector::Zero(op.dim_out());
  const double t = detail::stencil_step(op.steps().third, x, h);
  const Vector fp2 = eval(op, x + 2.0 * t * h);
  const Vector fp1 = eval(op, x + t * h);
  const Vector fm1 = eval(op, x - t * h);
  const Vector fm2 = eval(op, x - 2.0 * t * h);
  // grouped so that h -> -h negates the result exactly
  return ((fp2 - fm2) - 2.0 * (fp1 - fm1)) / (2.0 * t * t * t);
}

/// x -> F(x + offset), derivatives shifted accordingly.
inline Operator shifted(const Operator& op, const Vector& offset) {
  require_dim(offset, op.dim_in(), "shifted offset");
  auto base = std::make_shared<const Operator>(op);
  Operator out(op.name() + "[shifted]", op.dim_in(), op.dim_out(),
               [base, offset](const Vector& x) { return eval(*base, x + offset); });
  out.with_steps(op.steps());
  if (op.weights().size() > 0) out.with_weights(op.weights());
  if (op.has_analytic_jacobian())
    out.with_jacobian([base, offset](const Vector& x) { return jacobian(*base, x + offset); });
  if (op.has_analytic_second())
    out.with_second([base, offset](const Vector& x, const Vector& h) { return d2_dir(*base, x + offset, h); });
  if (op.has_analytic_third())
    out.with_third([base, offset](const Vector& x, const Vector& h) { return d3_dir(*base, x + offset, h); });
  return out;
}

// ---------------------------------------------------------------------------
// Built-in problems.

namespace detail {

/// Scalar polynomial-like map applied in one dimension with its derivatives.
struct ScalarMap {
  std::function<double(double)> f, f1, f2, f3;
};

inline Operator scalar_operator(const std::string& name, ScalarMap m) {
  Operator op(name, 1, 1, [f = m.f](const Vector& x) { return Vector::Constant(1, f(x(0))); });
  op.with_jacobian([f1 = m.f1](const Vector& x) { return Matrix::Constant(1, 1, f1(x(0))); })
      .with_second([f2 = m.f2](const Vector& x, const Vector& h) {
        return Vector::Constant(1, f2(x(0)) * h(0) * h(0));
      })
      .with_third([f3 = m.f3](const Vector& x, const Vector& h) {
        return Vector::Constant(1, f3(x(0)) * h(0) * h(0) * h(0));
      });
  return op;
}

}  // namespace detail

/// F(x) = x^3 + x^5.
inline Operator quintic1d() {
  return detail::scalar_operator(
      "quintic1d", {[](double x) { return x * x * x + x * x * x * x * x; },
                    [](double x) { return 3 * x * x + 5 * x * x * x * x; },
                    [](double x) { return 6 * x + 20 * x * x * x; },
                    [](double x) { return 6 + 60 * x * x; }});
}

/// F(x) = (x1^3 + x1^5 - x2^5, x2^3 + x2^5 + x1^5).
inline Operator planar() {
  auto p = [](double v, int k) { return std::pow(v, k); };
  Operator op("planar", 2, 2, [p](const Vector& x) {
    Vector f(2);
    f(0) = p(x(0), 3) + p(x(0), 5) - p(x(1), 5);
    f(1) = p(x(1), 3) + p(x(1), 5) + p(x(0), 5);
    return f;
  });
  op.with_jacobian([p](const Vector& x) {
      Matrix j(2, 2);
      j << 3 * p(x(0), 2) + 5 * p(x(0), 4), -5 * p(x(1), 4),
           5 * p(x(0), 4), 3 * p(x(1), 2) + 5 * p(x(1), 4);
      return j;
    })
    .with_second([p](const Vector& x, const Vector& h) {
      // second derivatives of each monomial, diagonal Hessians
      const double a = (6 * x(0) + 20 * p(x(0), 3)) * h(0) * h(0);
      const double b = (6 * x(1) + 20 * p(x(1), 3)) * h(1) * h(1);
      Vector out(2);
      out(0) = a - 20 * p(x(1), 3) * h(1) * h(1);
      out(1) = b + 20 * p(x(0), 3) * h(0) * h(0);
      return out;
    })
    .with_third([p](const Vector& x, const Vector& h) {
      const double h0 = p(h(0), 3), h1 = p(h(1), 3);
      Vector out(2);
      out(0) = (6 + 60 * x(0) * x(0)) * h0 - 60 * x(1) * x(1) * h1;
      out(1) = (6 + 60 * x(1) * x(1)) * h1 + 60 * x(0) * x(0) * h0;
      return out;
    });
  return op;
}

/// F(x) = x^3; F'''(x)h^3 = 6h^3 everywhere.
inline Operator pure_cubic() {
  return detail::scalar_operator("pure-cubic", {[](double x) { return x * x * x; },
                                                [](double x) { return 3 * x * x; },
                                                [](double x) { return 6 * x; },
                                                [](double) { return 6.0; }});
}

/// G(x) = x^3 - x, the non-injective control (G(-1) = G(0) = G(1) = 0).
inline Operator cube_minus_x() {
  return detail::scalar_operator("cube-minus-x", {[](double x) { return x * x * x - x; },
                                                  [](double x) { return 3 * x * x - 1; },
                                                  [](double x) { return 6 * x; },
                                                  [](double) { return 6.0; }});
}

/// F(x) = x^2: F'(0) = 0 but F''(0) = 2, so 0 is neither regular nor degenerate.
inline Operator square() {
  return detail::scalar_operator("square", {[](double x) { return x * x; },
                                            [](double x) { return 2 * x; },
                                            [](double) { return 2.0; },
                                            [](double) { return 0.0; }});
}

inline Operator linear(double slope = 1.0, const std::string& name = "linear") {
  return detail::scalar_operator(name, {[slope](double x) { return slope * x; },
                                        [slope](double) { return slope; },
                                        [](double) { return 0.0; },
                                        [](double) { return 0.0; }});
}

/// F(x) = atan(x): bounded, so phi_y for |y| > pi/2 keeps bounded values while
/// its gradient vanishes at infinity (Palais-Smale fails).
inline Operator bounded_atan() {
  return detail::scalar_operator(
      "bounded-atan",
      {[](double x) { return std::atan(x); },
       [](double x) { return 1.0 / (1.0 + x * x); },
       [](double x) { return -2.0 * x / ((1.0 + x * x) * (1.0 + x * x)); },
       [](double x) { return (6.0 * x * x - 2.0) / std::pow(1.0 + x * x, 3); }});
}

/// F(x)_i = c_i x_i^3.
inline Operator diagonal_cubic(const Vector& coeffs) {
  const Index n = coeffs.size();
  Operator op("diagonal-cubic", n, n,
              [coeffs](const Vector& x) -> Vector { return coeffs.array() * x.array().cube(); });
  op.with_jacobian([coeffs](const Vector& x) -> Matrix {
      return (3.0 * coeffs.array() * x.array().square()).matrix().asDiagonal();
    })
    .with_second([coeffs](const Vector& x, const Vector& h) -> Vector {
      return 6.0 * coeffs.array() * x.array() * h.array().square();
    })
    .with_third([coeffs](const Vector&, const Vector& h) -> Vector {
      return 6.0 * coeffs.array() * h.array().cube();
    });
  return op;
}

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {"quintic1d", "planar", "pure-cubic",   "cube-minus-x",
                                                 "square",    "linear", "linear2",      "bounded-atan"};
  return names;
}

/// Looks up a named built-in problem. Throws ConfigError for unknown names.
inline Operator builtin(const std::string& name) {
  if (name == "quintic1d") return quintic1d();
  if (name == "planar") return planar();
  if (name == "pure-cubic") return pure_cubic();
  if (name == "cube-minus-x") return cube_minus_x();
  if (name == "square") return square();
  if (name == "linear") return linear(1.0);
  if (name == "linear2") return linear(2.0, "linear2");
  if (name == "bounded-atan") return bounded_atan();
  throw ConfigError("unknown built-in problem '" + name + "'");
}

}  // namespace varinv
