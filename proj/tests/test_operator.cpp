#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "varinv/hammerstein.hpp"
#include "varinv/operator.hpp"

using namespace varinv;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

std::vector<Operator> analytic_builtins() {
  std::vector<Operator> ops;
  for (const auto& name : builtin_names()) ops.push_back(builtin(name));
  ops.push_back(assemble_operator(bilinear_kernel(1.0, 1.0), quartic_perturbation(0.01),
                                  make_grid(16, QuadratureRule::Trapezoid)));
  return ops;
}

}  // namespace

TEST(Eval, BuiltinExamples) {
  EXPECT_DOUBLE_EQ(eval(quintic1d(), vec({1.0}))(0), 2.0);
  EXPECT_EQ(eval(planar(), vec({0.0, 0.0})), vec({0.0, 0.0}));
  EXPECT_EQ(eval(planar(), vec({1.0, 1.0})), vec({1.0, 3.0}));
}

TEST(Eval, Errors) {
  EXPECT_THROW(eval(planar(), vec({1.0})), DimensionError);
  Operator blowup("blowup", 1, 1, [](const Vector& x) { return Vector::Constant(1, 1.0 / x(0)); });
  EXPECT_THROW(eval(blowup, vec({0.0})), NumericalError);
}

TEST(Jacobian, Examples) {
  EXPECT_DOUBLE_EQ(jacobian(quintic1d(), vec({1.0}))(0, 0), 8.0);
  EXPECT_DOUBLE_EQ(jacobian(quintic1d(), vec({0.0}))(0, 0), 0.0);
  const Vector x = vec({0.7, -1.3});
  const Matrix j = jacobian(planar(), x);
  EXPECT_NEAR(j(0, 0), 3 * std::pow(0.7, 2) + 5 * std::pow(0.7, 4), 1e-14);
  EXPECT_NEAR(j(0, 1), -5 * std::pow(-1.3, 4), 1e-14);
  EXPECT_NEAR(j(1, 0), 5 * std::pow(0.7, 4), 1e-14);
  EXPECT_NEAR(j(1, 1), 3 * std::pow(-1.3, 2) + 5 * std::pow(-1.3, 4), 1e-14);
}

TEST(SecondDirectional, Examples) {
  for (double h : {-2.0, 0.5, 3.0}) EXPECT_EQ(d2_dir(quintic1d(), vec({0.0}), vec({h}))(0), 0.0);
  // F''(x) = 6x + 20x^3 by hand; also the second difference of F(1 + t)
  EXPECT_DOUBLE_EQ(d2_dir(quintic1d(), vec({1.0}), vec({1.0}))(0), 26.0);
  auto g = [](double t) { return std::pow(1 + t, 3) + std::pow(1 + t, 5); };
  EXPECT_NEAR(oracle::diff2(g, 0.0, 1e-4), 26.0, 1e-5);
  EXPECT_EQ(d2_dir(planar(), vec({0.0, 0.0}), vec({0.3, -2.0})), vec({0.0, 0.0}));
}

TEST(ThirdDirectional, Examples) {
  for (double h : {-2.0, 0.5, 3.0}) EXPECT_DOUBLE_EQ(d3_dir(quintic1d(), vec({0.0}), vec({h}))(0), 6 * h * h * h);
  EXPECT_EQ(d3_dir(planar(), vec({0.0, 0.0}), vec({1.5, -2.0})), vec({6 * 3.375, 6 * -8.0}));
}

TEST(ThirdDirectional, FiniteDifferenceConvergesAtSecondOrder) {
  // error of the five-point stencil at x = 0 is (60 * 1/4) * t^2 * ... from the
  // quintic term: measure it directly at decreasing steps
  const Operator fd = quintic1d().finite_difference_only();
  double prev_err = 0.0;
  for (double step : {4e-2, 2e-2, 1e-2}) {
    Operator op = fd;
    op.with_steps({1e-6, 1e-4, step});
    const double err = std::abs(d3_dir(op, vec({0.0}), vec({1.0}))(0) - 6.0);
    if (prev_err > 0.0) {
      EXPECT_NEAR(prev_err / err, 4.0, 0.05);
    }
    prev_err = err;
  }
  EXPECT_NEAR(d3_dir(fd, vec({0.0}), vec({1.0}))(0), 6.0, 1e-4);
}

TEST(Builtin, NamedProblems) {
  EXPECT_DOUBLE_EQ(eval(builtin("quintic1d"), vec({1.0}))(0), 2.0);
  const Operator p = builtin("planar");
  EXPECT_EQ(p.dim_in(), 2);
  EXPECT_EQ(p.dim_out(), 2);
  const Operator g = builtin("cube-minus-x");
  for (double x : {0.0, 1.0, -1.0}) EXPECT_EQ(eval(g, vec({x}))(0), 0.0);
  EXPECT_EQ(builtin("pure-cubic").mode(), DerivativeMode::Analytic);
  EXPECT_THROW(builtin("no-such-problem"), ConfigError);
}

TEST(Shifted, MatchesOffsetEvaluation) {
  const Operator op = planar();
  const Vector off = vec({0.2, -0.4});
  const Operator s = shifted(op, off);
  const Vector x = vec({1.1, 0.3}), h = vec({0.5, 0.25});
  EXPECT_TRUE(eval(s, x).isApprox(eval(op, x + off)));
  EXPECT_TRUE(jacobian(s, x).isApprox(jacobian(op, x + off)));
  EXPECT_TRUE(d3_dir(s, x, h).isApprox(d3_dir(op, x + off, h)));
}

// Analytic derivatives against central finite differences written in the test
// at steps 1e-5 / 1e-4 / 1e-3; mixed absolute/relative tolerance 1e-5 / 1e-4 / 1e-3 by order.
TEST(DerivativeConsistency, AnalyticMatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uni(-1.5, 1.5);
  for (const Operator& op : analytic_builtins()) {
    ASSERT_EQ(op.mode(), DerivativeMode::Analytic) << op.name();
    for (int sample = 0; sample < 100; ++sample) {
      Vector x(op.dim_in()), h(op.dim_in());
      for (Index i = 0; i < x.size(); ++i) {
        x(i) = uni(rng);
        h(i) = uni(rng);
      }
      auto along = [&](Index comp) {
        return [&, comp](double t) { return eval(op, x + t * h)(comp); };
      };
      const Vector jh = jacobian(op, x) * h;
      const Vector d2 = d2_dir(op, x, h);
      const Vector d3 = d3_dir(op, x, h);
      for (Index c = 0; c < op.dim_out(); ++c) {
        const auto g = along(c);
        EXPECT_TRUE(oracle::close(jh(c), oracle::diff1(g, 0.0, 1e-5), 1e-5)) << op.name();
        EXPECT_TRUE(oracle::close(d2(c), oracle::diff2(g, 0.0, 1e-4), 1e-4)) << op.name();
        EXPECT_TRUE(oracle::close(d3(c), oracle::diff3(g, 0.0, 1e-3), 1e-3)) << op.name();
      }
    }
  }
}

TEST(DerivativeProperties, HomogeneityOddnessDeterminism) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (const Operator& analytic : analytic_builtins()) {
    for (const Operator& op : {analytic, analytic.finite_difference_only()}) {
      const bool exact = op.mode() == DerivativeMode::Analytic;
      for (int sample = 0; sample < 20; ++sample) {
        Vector x(op.dim_in()), h(op.dim_in());
        for (Index i = 0; i < x.size(); ++i) {
          x(i) = uni(rng);
          h(i) = uni(rng);
        }
        const Vector d2 = d2_dir(op, x, h), d2x2 = d2_dir(op, x, 2.0 * h);
        const Vector d3 = d3_dir(op, x, h), d3x2 = d3_dir(op, x, 2.0 * h);
        const Vector d3neg = d3_dir(op, x, -h);
        if (exact) {
          EXPECT_LE((d2x2 - 4.0 * d2).norm(), 1e-13 * std::max(1.0, d2x2.norm())) << op.name();
          EXPECT_LE((d3x2 - 8.0 * d3).norm(), 1e-13 * std::max(1.0, d3x2.norm())) << op.name();
        } else {
          EXPECT_LE((d2x2 - 4.0 * d2).norm(), 1e-10 * std::max(1.0, d2x2.norm())) << op.name();
          EXPECT_LE((d3x2 - 8.0 * d3).norm(), 1e-10 * std::max(1.0, d3x2.norm())) << op.name();
        }
        EXPECT_LE((d3neg + d3).norm(), 1e-13 * std::max(1.0, d3.norm())) << op.name();
        EXPECT_EQ(eval(op, x), eval(op, x));
        EXPECT_EQ(jacobian(op, x), jacobian(op, x));
        EXPECT_EQ(d3_dir(op, x, h), d3);
      }
    }
  }
}

TEST(FiniteDifference, FallbackMatchesAnalyticAtDocumentedSteps) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (const Operator& op : analytic_builtins()) {
    const Operator fd = op.finite_difference_only();
    for (int sample = 0; sample < 10; ++sample) {
      Vector x(op.dim_in()), h(op.dim_in());
      for (Index i = 0; i < x.size(); ++i) {
        x(i) = uni(rng);
        h(i) = uni(rng);
      }
      const double scale1 = std::max(1.0, jacobian(op, x).norm());
      EXPECT_LE((jacobian(fd, x) - jacobian(op, x)).norm(), 1e-6 * scale1) << op.name();
      const Vector d2 = d2_dir(op, x, h), d3 = d3_dir(op, x, h);
      EXPECT_LE((d2_dir(fd, x, h) - d2).norm(), 1e-4 * std::max(1.0, d2.norm())) << op.name();
      EXPECT_LE((d3_dir(fd, x, h) - d3).norm(), 1e-3 * std::max(1.0, d3.norm())) << op.name();
    }
  }
}

TEST(FiniteDifference, StepUnderflowIsReported) {
  Operator op = quintic1d().finite_difference_only();
  op.with_steps({1e-6, 1e-300, 1e-3});
  EXPECT_THROW(d2_dir(op, vec({1e10}), vec({1.0})), NumericalError);
}
