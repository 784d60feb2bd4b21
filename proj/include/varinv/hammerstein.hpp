#pragma once

// Nystrom discretization of the Hammerstein-type operator
//
//   F(x) = A(x^2) x + r(x),   (A z)(t) = int_0^1 K(t, s) z(s) ds,
//
// with alpha <= K <= beta, alpha > 0. With r = o(|x|^3) at the origin,
// F'(0) = F''(0) = 0 and F'''(0)h^3 = 6 A(h^2) h.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

#include "varinv/errors.hpp"
#include "varinv/linalg.hpp"
#include "varinv/operator.hpp"

namespace varinv {

enum class QuadratureRule { Trapezoid, GaussLegendre };

inline const char* to_string(QuadratureRule r) {
  return r == QuadratureRule::Trapezoid ? "trapezoid" : "gauss-legendre";
}

struct QuadratureGrid {
  Vector nodes;
  Vector weights;
  QuadratureRule rule = QuadratureRule::Trapezoid;

  Index size() const { return nodes.size(); }
};

namespace detail {

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
inline std::pair<Vector, Vector> gauss_legendre_reference(int n) {
  Vector x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
    }
    x(i) = z;
    w(i) = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

}  // namespace detail

/// Quadrature on [0, 1] with n nodes: composite trapezoid (n >= 2, endpoints
/// included) or Gauss-Legendre (n >= 1). Nodes increase; weights sum to 1.
inline QuadratureGrid make_grid(int n, QuadratureRule rule = QuadratureRule::Trapezoid) {
  QuadratureGrid g;
  g.rule = rule;
  if (rule == QuadratureRule::Trapezoid) {
    if (n < 2) throw ConfigError("trapezoid grid needs at least 2 nodes");
    g.nodes.resize(n);
    g.weights.resize(n);
    const double h = 1.0 / (n - 1);
    for (int i = 0; i < n; ++i) {
      g.nodes(i) = static_cast<double>(i) / (n - 1);
      g.weights(i) = (i == 0 || i == n - 1) ? 0.5 * h : h;
    }
    return g;
  }
  if (n < 1) throw ConfigError("Gauss-Legendre grid needs at least 1 node");
  auto [x, w] = detail::gauss_legendre_reference(n);
  g.nodes.resize(n);
  g.weights.resize(n);
  // reference nodes come out in decreasing order
  for (int i = 0; i < n; ++i) {
    g.nodes(i) = 0.5 * (1.0 + x(n - 1 - i));
    g.weights(i) = 0.5 * w(n - 1 - i);
  }
  return g;
}

/// Weighted L2 norm on the grid.
inline double grid_norm(const QuadratureGrid& grid, const Vector& v) {
  require_dim(v, grid.size(), "grid_norm");
  return weighted_norm(v, grid.weights);
}

struct KernelSpec {
  std::string name;
  std::function<double(double, double)> k;  ///< empty for tabulated kernels
  std::optional<Matrix> table;              ///< K(t_i, s_j) on a specific grid
  double alpha = 0.0;
  double beta = 0.0;
};

inline KernelSpec constant_kernel(double value) {
  return {"constant", [value](double, double) { return value; }, std::nullopt, value, value};
}

/// K(t, s) = a + b t s on [0,1]^2.
inline KernelSpec bilinear_kernel(double a, double b) {
  return {"bilinear", [a, b](double t, double s) { return a + b * t * s; }, std::nullopt, std::min(a, a + b),
          std::max(a, a + b)};
}

/// Kernel given by its values on the quadrature grid; bounds from the table.
inline KernelSpec tabulated_kernel(Matrix values) {
  if (values.rows() != values.cols() || values.size() == 0) throw ConfigError("tabulated kernel must be square");
  KernelSpec k;
  k.name = "tabulated";
  k.alpha = values.minCoeff();
  k.beta = values.maxCoeff();
  k.table = std::move(values);
  return k;
}

/// K(t_i, s_j) on the grid, after checking 0 < alpha <= K <= beta.
inline Matrix kernel_matrix(const KernelSpec& kernel, const QuadratureGrid& grid) {
  const Index n = grid.size();
  Matrix k(n, n);
  if (kernel.table) {
    if (kernel.table->rows() != n) throw ConfigError("tabulated kernel size does not match the grid");
    k = *kernel.table;
  } else {
    if (!kernel.k) throw ConfigError("kernel has neither a function nor a table");
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) k(i, j) = kernel.k(grid.nodes(i), grid.nodes(j));
  }
  if (!(kernel.alpha > 0.0) || kernel.beta < kernel.alpha) throw ConfigError("kernel bounds need 0 < alpha <= beta");
  const double slack = 1e-12 * std::max(1.0, kernel.beta);
  if (!k.allFinite() || k.minCoeff() < kernel.alpha - slack || k.maxCoeff() > kernel.beta + slack) {
    throw ConfigError("kernel values leave [alpha, beta] on the grid");
  }
  return k;
}

/// Pointwise perturbation r with derivatives up to order three.
struct PerturbationSpec {
  std::string name = "zero";
  std::function<double(double)> r = [](double) { return 0.0; };
  std::function<double(double)> r1 = [](double) { return 0.0; };
  std::function<double(double)> r2 = [](double) { return 0.0; };
  std::function<double(double)> r3 = [](double) { return 0.0; };
  bool zero_to_cubic = true;  ///< asserts r(v) = o(|v|^3) at 0
};

inline PerturbationSpec zero_perturbation() { return {}; }

/// r(v) = c v^4.
inline PerturbationSpec quartic_perturbation(double c = 0.01) {
  return {"quartic",
          [c](double v) { return c * v * v * v * v; },
          [c](double v) { return 4.0 * c * v * v * v; },
          [c](double v) { return 12.0 * c * v * v; },
          [c](double v) { return 24.0 * c * v; },
          true};
}

/// (A z)(t_i) = sum_j w_j K(t_i, s_j) z(s_j).
inline Vector apply_A(const KernelSpec& kernel, const QuadratureGrid& grid, const Vector& z) {
  require_dim(z, grid.size(), "apply_A");
  const Matrix k = kernel_matrix(kernel, grid);
  return k * (grid.weights.array() * z.array()).matrix();
}

namespace detail {

inline Vector map_pointwise(const std::function<double(double)>& f, const Vector& v) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out(i) = f(v(i));
  return out;
}

}  // namespace detail

/// Discretized F(x) = A(x^2)x + r(x) with analytic derivatives
///   F'(x)h     = A(x^2)h + 2A(xh)x + r'(x)h
///   F''(x)h^2  = 2A(h^2)x + 4A(xh)h + r''(x)h^2
///   F'''(x)h^3 = 6A(h^2)h + r'''(x)h^3
/// and the grid weights as its inner product.
inline Operator assemble_operator(const KernelSpec& kernel, const PerturbationSpec& pert, const QuadratureGrid& grid) {
  const Index n = grid.size();
  const Matrix kw = kernel_matrix(kernel, grid) * grid.weights.asDiagonal();  // A z = kw * z
  Operator op("hammerstein", n, n, [kw, pert](const Vector& x) -> Vector {
    const Vector ax2 = kw * x.cwiseProduct(x);
    return ax2.cwiseProduct(x) + detail::map_pointwise(pert.r, x);
  });
  op.with_jacobian([kw, pert](const Vector& x) -> Matrix {
      const Vector ax2 = kw * x.cwiseProduct(x);
      Matrix j = 2.0 * x.asDiagonal() * kw * x.asDiagonal();
      j.diagonal() += ax2 + detail::map_pointwise(pert.r1, x);
      return j;
    })
    .with_second([kw, pert](const Vector& x, const Vector& h) -> Vector {
      const Vector ah2 = kw * h.cwiseProduct(h);
      const Vector axh = kw * x.cwiseProduct(h);
      return 2.0 * ah2.cwiseProduct(x) + 4.0 * axh.cwiseProduct(h) +
             detail::map_pointwise(pert.r2, x).cwiseProduct(h.cwiseProduct(h));
    })
    .with_third([kw, pert](const Vector& x, const Vector& h) -> Vector {
      const Vector ah2 = kw * h.cwiseProduct(h);
      return 6.0 * ah2.cwiseProduct(h) + detail::map_pointwise(pert.r3, x).cwiseProduct(h.cwiseProduct(h).cwiseProduct(h));
    })
    .with_weights(grid.weights);
  return op;
}

/// max_i |x_i - (fx_i - r(x_i)) / A(x^2)_i|, which vanishes when fx = F(x).
inline double fixed_point_residual(const KernelSpec& kernel, const PerturbationSpec& pert, const QuadratureGrid& grid,
                                   const Vector& x, const Vector& fx) {
  require_dim(x, grid.size(), "fixed_point_residual x");
  require_dim(fx, grid.size(), "fixed_point_residual fx");
  const Vector denom = apply_A(kernel, grid, x.cwiseProduct(x));
  if (!(denom.minCoeff() > 0.0)) throw DegenerateInputError("fixed_point_residual: A(x^2) vanishes (x = 0)");
  const Vector recovered = (fx - detail::map_pointwise(pert.r, x)).cwiseQuotient(denom);
  return (x - recovered).cwiseAbs().maxCoeff();
}

struct LowerBoundReport {
  double min_a_x2 = 0.0;  ///< min_i A(x^2)(t_i)
  double bound = 0.0;     ///< alpha * sum_j w_j x_j^2
  bool holds = false;
};

/// Checks min_i A(x^2)(t_i) >= alpha |x|^2 with the squared grid norm.
inline LowerBoundReport lower_bound_check(const KernelSpec& kernel, const QuadratureGrid& grid, const Vector& x) {
  LowerBoundReport rep;
  rep.min_a_x2 = apply_A(kernel, grid, x.cwiseProduct(x)).minCoeff();
  rep.bound = kernel.alpha * grid.weights.dot(x.cwiseProduct(x));
  rep.holds = rep.min_a_x2 >= rep.bound - 1e-14 * std::max(1.0, std::abs(rep.bound));
  return rep;
}

inline Vector manufacture_target(const KernelSpec& kernel, const PerturbationSpec& pert, const QuadratureGrid& grid,
                                 const Vector& x_star) {
  return eval(assemble_operator(kernel, pert, grid), x_star);
}

}  // namespace varinv
