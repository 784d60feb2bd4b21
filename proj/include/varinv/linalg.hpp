#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "varinv/errors.hpp"

namespace varinv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// Inner product with optional positive weights; an empty weight vector means
/// the Euclidean product.
inline double weighted_dot(const Vector& u, const Vector& v, const Vector& weights) {
  if (weights.size() == 0) return u.dot(v);
  return (u.array() * v.array() * weights.array()).sum();
}

inline double weighted_norm(const Vector& v, const Vector& weights) {
  return std::sqrt(weighted_dot(v, v, weights));
}

inline void require_dim(const Vector& v, Index expected, const char* what) {
  if (v.size() != expected) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                         ", got " + std::to_string(v.size()));
  }
}

/// Solves a square system by full-pivot LU. Throws SingularMatrixError when the
/// factorization is rank deficient or the back-substituted residual exceeds
/// 1e-10 (|A||x| + |b|).
inline Vector solve_square(const Matrix& a, const Vector& b) {
  if (a.rows() != a.cols()) {
    throw DimensionError("solve_square: matrix is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()));
  }
  require_dim(b, a.rows(), "solve_square rhs");
  if (!a.allFinite() || !b.allFinite()) throw NumericalError("solve_square: non-finite input");

  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw SingularMatrixError("solve_square: matrix is numerically singular");
  Vector x = lu.solve(b);
  const double bound = 1e-10 * (a.norm() * x.norm() + b.norm());
  if (!x.allFinite() || (a * x - b).norm() > bound) {
    throw SingularMatrixError("solve_square: residual bound violated (ill-conditioned matrix)");
  }
  return x;
}

/// Smallest singular value of a square matrix.
inline double sigma_min(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("sigma_min: matrix is not square");
  if (a.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(a);
  return svd.singularValues().minCoeff();
}

inline double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(a);
  return svd.singularValues().maxCoeff();
}

/// Unit probing directions: the 2*dim signed basis vectors followed by
/// `n_random` seeded Gaussian directions normalized to unit length.
inline std::vector<Vector> sample_unit_directions(Index dim, int n_random, std::uint64_t seed) {
  std::vector<Vector> dirs;
  dirs.reserve(static_cast<std::size_t>(2 * dim + n_random));
  for (Index i = 0; i < dim; ++i) {
    dirs.push_back(Vector::Unit(dim, i));
    dirs.push_back(-Vector::Unit(dim, i));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < n_random; ++k) {
    Vector v(dim);
    double n = 0.0;
    do {
      for (Index i = 0; i < dim; ++i) v(i) = normal(rng);
      n = v.norm();
    } while (n < 1e-12);
    dirs.push_back(v / n);
  }
  return dirs;
}

}  // namespace varinv
