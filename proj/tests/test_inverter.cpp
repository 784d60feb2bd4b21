#include <gtest/gtest.h>

#include "oracles.hpp"
#include "varinv/inverter.hpp"

using namespace varinv;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// F(x) = (x1^3 + x2^3, x1^3 - x2^3): degenerate at 0, F''' onto but not diagonal
Operator mixed_cubic() {
  Operator op("mixed-cubic", 2, 2, [](const Vector& x) {
    const double a = x(0) * x(0) * x(0), b = x(1) * x(1) * x(1);
    return vec({a + b, a - b});
  });
  op.with_jacobian([](const Vector& x) {
      Matrix j(2, 2);
      j << 3 * x(0) * x(0), 3 * x(1) * x(1), 3 * x(0) * x(0), -3 * x(1) * x(1);
      return j;
    })
    .with_second([](const Vector& x, const Vector& h) {
      const double a = 6 * x(0) * h(0) * h(0), b = 6 * x(1) * h(1) * h(1);
      return vec({a + b, a - b});
    })
    .with_third([](const Vector&, const Vector& h) {
      const double a = 6 * std::pow(h(0), 3), b = 6 * std::pow(h(1), 3);
      return vec({a + b, a - b});
    });
  return op;
}

void expect_monotone(const SolveReport& rep) {
  for (std::size_t i = 1; i < rep.trace.size(); ++i) {
    EXPECT_LE(rep.trace[i].phi, rep.trace[i - 1].phi) << "trace entry " << i;
  }
}

}  // namespace

TEST(Classify, Examples) {
  const auto at1 = classify_critical(quintic1d(), vec({1.0}));
  EXPECT_EQ(at1.tag, CriticalTag::Regular);
  EXPECT_NEAR(at1.sigma_min, 8.0, 1e-14);
  EXPECT_EQ(classify_critical(quintic1d(), vec({0.0})).tag, CriticalTag::Degenerate);
  const auto sq = classify_critical(square(), vec({0.0}));
  EXPECT_EQ(sq.tag, CriticalTag::HypothesisViolated);
  EXPECT_NEAR(sq.d2_norm, 2.0, 1e-14);
}

TEST(Classify, QuinticRegularAwayFromOrigin) {
  for (double x = 0.1; x <= 5.0; x += 0.05) {
    EXPECT_EQ(classify_critical(quintic1d(), vec({x})).tag, CriticalTag::Regular) << x;
    EXPECT_EQ(classify_critical(quintic1d(), vec({-x})).tag, CriticalTag::Regular) << -x;
  }
}

TEST(Classify, DegenerateCases) {
  const auto planar0 = classify_critical(planar(), vec({0.0, 0.0}));
  EXPECT_EQ(planar0.tag, CriticalTag::Degenerate);
  EXPECT_TRUE(planar0.diagonal_third);
  EXPECT_NEAR(planar0.diagonal_coeffs(0), 6.0, 1e-12);
  EXPECT_NEAR(planar0.diagonal_coeffs(1), 6.0, 1e-12);
  EXPECT_EQ(classify_critical(pure_cubic(), vec({0.0})).tag, CriticalTag::Degenerate);

  // onto but not coordinatewise: needs the surjectivity assertion
  EXPECT_EQ(classify_critical(mixed_cubic(), vec({0.0, 0.0})).tag, CriticalTag::HypothesisViolated);
  ClassifyOptions assume;
  assume.assume_surjective = true;
  EXPECT_EQ(classify_critical(mixed_cubic(), vec({0.0, 0.0}), assume).tag, CriticalTag::Degenerate);

  // a zero coefficient breaks the diagonal certificate
  EXPECT_EQ(classify_critical(diagonal_cubic(vec({1.0, 0.0})), vec({0.0, 0.0})).tag, CriticalTag::HypothesisViolated);
  // F''' = 0 is never degenerate, even when asserted onto
  EXPECT_EQ(classify_critical(linear(0.0, "zero"), vec({0.0}), assume).tag, CriticalTag::HypothesisViolated);
}

TEST(Classify, FiniteDifferenceOperatorsAgree) {
  EXPECT_EQ(classify_critical(planar().finite_difference_only(), vec({0.0, 0.0})).tag, CriticalTag::Degenerate);
  EXPECT_EQ(classify_critical(quintic1d().finite_difference_only(), vec({0.5})).tag, CriticalTag::Regular);
}

TEST(Classify, RejectsNonSquare) {
  Operator rect("rect", 2, 1, [](const Vector& x) { return Vector::Constant(1, x.sum()); });
  EXPECT_THROW(classify_critical(rect, vec({0.0, 0.0})), UnsupportedError);
  EXPECT_THROW(invert(rect, vec({1.0}), vec({0.0, 0.0})), UnsupportedError);
}

TEST(GaussNewton, Examples) {
  EXPECT_EQ(gauss_newton_step(quintic1d(), vec({2.0}), vec({1.0}))(0), 1.0);
  EXPECT_DOUBLE_EQ(gauss_newton_step(linear(2.0, "linear2"), vec({4.0}), vec({0.0}))(0), 2.0);
  const LeastSquaresFunctional f(quintic1d(), vec({2.0}));
  const Vector x = vec({1.5});
  const double before = phi(f, x);
  double damping = 1.0;
  while (phi(f, gauss_newton_step(quintic1d(), vec({2.0}), x, damping)) >= before && damping > 1e-6) damping *= 0.5;
  EXPECT_LT(phi(f, gauss_newton_step(quintic1d(), vec({2.0}), x, damping)), before);
  EXPECT_EQ(damping, 1.0);
}

TEST(GaussNewton, ErrorsAndFallback) {
  EXPECT_THROW(gauss_newton_step(quintic1d(), vec({2.0}), vec({1.0}), 0.0), ConfigError);
  EXPECT_THROW(gauss_newton_step(quintic1d(), vec({2.0}), vec({1.0}), 1.5), ConfigError);
  EXPECT_THROW(gauss_newton_step(square(), vec({1.0}), vec({0.0})), SingularJacobianError);
  // rank-one Jacobian at (1, 0) for the diagonal cubic with a zero row: regularized step stays finite
  const Operator d = diagonal_cubic(vec({1.0, 2.0}));
  const Vector step = gauss_newton_step(d, vec({2.0, 0.0}), vec({1.0, 0.0}));
  EXPECT_TRUE(step.allFinite());
  EXPECT_NEAR(step(0), 1.0 + 1.0 / 3.0, 1e-8);
}

TEST(CubicStep, ClosedFormOnSixCube) {
  EXPECT_EQ(cubic_step(pure_cubic(), vec({6.0}), vec({0.0}))(0), 1.0);
  EXPECT_EQ(cubic_step(pure_cubic(), vec({-6.0}), vec({0.0}))(0), -1.0);
  EXPECT_EQ(cubic_step(planar(), vec({6.0, -6.0}), vec({0.0, 0.0})), vec({1.0, -1.0}));
  for (double y : {6.0, -6.0, 48.0, -48.0, 0.75}) {
    const auto res = cubic_step_detail(pure_cubic(), vec({y}), vec({0.0}));
    EXPECT_TRUE(res.closed_form);
    EXPECT_NEAR(res.point(0), std::cbrt(y / 6.0), 1e-14);
  }
  EXPECT_EQ(cubic_step(pure_cubic(), vec({0.0}), vec({0.0}))(0), 0.0);
}

TEST(CubicStep, TaylorModelIsExactForPureCubics) {
  CubicStepOptions taylor;
  taylor.model = CubicModel::Taylor;
  for (double y : {-27.0, -1.0, 0.3, 8.0}) {
    const Vector x = cubic_step(pure_cubic(), vec({y}), vec({0.0}), taylor);
    EXPECT_NEAR(eval(pure_cubic(), x)(0), y, 1e-13 * std::max(1.0, std::abs(y)));
  }
}

TEST(CubicStep, InnerSolveForNonDiagonalForms) {
  const Operator op = mixed_cubic();
  const Vector y = vec({3.0, -1.5});
  const auto res = cubic_step_detail(op, y, vec({0.0, 0.0}));
  EXPECT_FALSE(res.closed_form);
  EXPECT_LE((d3_dir(op, vec({0.0, 0.0}), res.step) - y).norm(), 1e-10);
  // componentwise oracle: 6 a = (y1 + y2)/2, 6 b = (y1 - y2)/2
  EXPECT_NEAR(res.step(0), std::cbrt((y(0) + y(1)) / 12.0), 1e-9);
  EXPECT_NEAR(res.step(1), std::cbrt((y(0) - y(1)) / 12.0), 1e-9);
}

TEST(CubicStep, StallRaises) {
  // F''' vanishes identically for x^2, so the cubic model cannot reach y
  EXPECT_THROW(cubic_step(square(), vec({1.0}), vec({0.0})), DegenerateSolveError);
}

TEST(Invert, Examples) {
  auto r1 = invert(quintic1d(), vec({2.0}), vec({0.0}));
  EXPECT_EQ(r1.status, SolveStatus::Converged);
  EXPECT_NEAR(r1.solution(0), oracle::quintic_inverse(2.0), 1e-10);
  EXPECT_LE(r1.residual_norm, 1e-10);

  auto r2 = invert(quintic1d(), vec({0.0}), vec({0.7}));
  EXPECT_EQ(r2.status, SolveStatus::Converged);
  EXPECT_NEAR(r2.solution(0), 0.0, 1e-3);
  EXPECT_LE(r2.residual_norm, 1e-9);

  auto r3 = invert(planar(), vec({1.0, 3.0}), vec({0.0, 0.0}));
  EXPECT_EQ(r3.status, SolveStatus::Converged);
  EXPECT_LE(r3.residual_norm, 1e-8);
  EXPECT_NEAR(r3.solution(0), 1.0, 1e-8);
  EXPECT_NEAR(r3.solution(1), 1.0, 1e-8);
  for (const auto* r : {&r1, &r2, &r3}) expect_monotone(*r);
}

TEST(Invert, QuinticMatchesBisection) {
  for (int k = 0; k <= 40; ++k) {
    const double y = -10.0 + 0.5 * k;
    const auto rep = invert(quintic1d(), vec({y}), vec({0.0}));
    EXPECT_EQ(rep.status, SolveStatus::Converged) << y;
    EXPECT_LE(rep.residual_norm, 1e-10) << y;
    EXPECT_NEAR(rep.solution(0), oracle::quintic_inverse(y), 1e-8) << y;
    expect_monotone(rep);
  }
}

TEST(Invert, PlanarMatchesNewtonOracle) {
  for (int a = 0; a < 5; ++a) {
    for (int b = 0; b < 5; ++b) {
      const Vector y = vec({-3.0 + 1.5 * a, -3.0 + 1.5 * b});
      const auto rep = invert(planar(), y, vec({0.0, 0.0}));
      EXPECT_EQ(rep.status, SolveStatus::Converged) << y.transpose();
      EXPECT_LE(rep.residual_norm, 1e-8) << y.transpose();
      const Eigen::Vector2d ref = oracle::planar_inverse(y);
      ASSERT_LE((oracle::planar_eval(ref) - y).norm(), 1e-10) << "oracle failed at " << y.transpose();
      EXPECT_LE((rep.solution - ref).norm(), 1e-6) << y.transpose();
      expect_monotone(rep);
    }
  }
}

TEST(Invert, DiagonalCubicsInOneStep) {
  const Operator op = diagonal_cubic(vec({2.0, -0.5, 3.0}));
  for (double s : {-8.0, -1.0, 0.25, 5.0}) {
    const Vector y = vec({s, -2.0 * s, 0.5 + s});
    const auto rep = invert(op, y, Vector::Zero(3));
    EXPECT_EQ(rep.status, SolveStatus::Converged);
    EXPECT_EQ(rep.iterations, 1) << s;
    EXPECT_LE(rep.residual_norm, 1e-12) << s;
  }
}

TEST(Invert, SpuriousCriticalPointOfSquare) {
  const auto rep = invert(square(), vec({-1.0}), vec({0.0}));
  EXPECT_EQ(rep.status, SolveStatus::HypothesisViolated);
  EXPECT_NEAR(rep.solution(0), 0.0, 1e-10);
  EXPECT_NEAR(rep.residual_norm, 1.0, 1e-12);
  EXPECT_EQ(rep.class_at_solution.tag, CriticalTag::HypothesisViolated);
  EXPECT_GE(rep.classified_points, 1);
  expect_monotone(rep);

  // every start lands on the same spurious point
  InvertOptions o;
  o.starts = 3;
  const auto multi = invert(square(), vec({-1.0}), vec({1.7}), o);
  EXPECT_EQ(multi.status, SolveStatus::HypothesisViolated);
  EXPECT_EQ(multi.runs, 4);
}

TEST(Invert, StalledOnIterationBudget) {
  InvertOptions o;
  o.max_iters = 2;
  o.starts = 0;
  const auto rep = invert(quintic1d(), vec({9.0}), vec({-3.0}), o);
  EXPECT_EQ(rep.status, SolveStatus::Stalled);
  EXPECT_GT(rep.residual_norm, o.tol_res);
  EXPECT_EQ(rep.iterations, 2);
}

TEST(Invert, InvalidOptions) {
  InvertOptions o;
  o.tol_res = 0.0;
  EXPECT_THROW(invert(quintic1d(), vec({1.0}), vec({0.0}), o), ConfigError);
  o = {};
  o.max_iters = 0;
  EXPECT_THROW(invert(quintic1d(), vec({1.0}), vec({0.0}), o), ConfigError);
  EXPECT_THROW(invert(quintic1d(), vec({1.0, 2.0}), vec({0.0}), InvertOptions{}), DimensionError);
}

TEST(Invert, DeterministicGivenSeed) {
  InvertOptions o;
  o.seed = 99;
  const auto a = invert(square(), vec({-1.0}), vec({2.0}), o);
  const auto b = invert(square(), vec({-1.0}), vec({2.0}), o);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].phi, b.trace[i].phi);
  EXPECT_EQ(a.solution, b.solution);
}

TEST(Certify, Examples) {
  const auto ok = invert(quintic1d(), vec({2.0}), vec({0.0}));
  EXPECT_TRUE(certify(quintic1d(), vec({2.0}), ok));

  SolveReport off = ok;
  off.solution = vec({oracle::quintic_inverse(2.1)});  // residual 0.1
  const auto c = certify_detail(quintic1d(), vec({2.0}), off);
  EXPECT_NEAR(c.residual_norm, 0.1, 1e-9);
  EXPECT_FALSE(c.certified);

  SolveReport spurious;
  spurious.solution = vec({0.0});
  const auto s = certify_detail(square(), vec({-1.0}), spurious);
  EXPECT_FALSE(s.certified);
  EXPECT_EQ(s.cls.tag, CriticalTag::HypothesisViolated);
  EXPECT_DOUBLE_EQ(s.residual_norm, 1.0);
}
