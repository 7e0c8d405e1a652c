// Apache License, Version 2.0, refer to LICENSE.txt

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "stanvi/autodiff.hpp"
#include "stanvi/error.hpp"
#include "stanvi/rng.hpp"

namespace stanvi::ad {
namespace {

TEST(Grad, Square) {
  const auto g = grad([](std::span<const Var> x) { return x[0] * x[0]; }, std::vector{3.0});
  EXPECT_DOUBLE_EQ(g.value, 9.0);
  EXPECT_DOUBLE_EQ(g.gradient[0], 6.0);
}

TEST(Grad, Log) {
  const auto g = grad([](std::span<const Var> x) { return log(x[0]); }, std::vector{2.0});
  EXPECT_NEAR(g.value, 0.6931471805599453, 1e-15);
  EXPECT_DOUBLE_EQ(g.gradient[0], 0.5);
}

TEST(Grad, SharedSubexpressionAccumulates) {
  // f = x*y + exp(x*y): df/dx = y (1 + e^{xy})
  const auto g = grad(
      [](std::span<const Var> x) {
        Var p = x[0] * x[1];
        return p + exp(p);
      },
      std::vector{0.5, 2.0});
  EXPECT_NEAR(g.gradient[0], 2.0 * (1 + std::exp(1.0)), 1e-12);
  EXPECT_NEAR(g.gradient[1], 0.5 * (1 + std::exp(1.0)), 1e-12);
}

TEST(Grad, NaNThrows) {
  EXPECT_THROW(grad([](std::span<const Var> x) { return log(x[0]); }, std::vector{-1.0}),
               NaNDetected);
}

TEST(Grad, ConstantsStayOffTape) {
  TapeScope scope;
  Var a(2.0), b(3.0);
  Var c = exp(a * b) + log(b);
  EXPECT_TRUE(c.is_constant());
  EXPECT_EQ(scope.tape().size(), 0u);
}

struct Primitive {
  std::string name;
  ScalarFunction f;
  double lo, hi;
  int arity;
};

std::vector<Primitive> primitives() {
  using S = std::span<const Var>;
  return {
      {"add", [](S x) { return x[0] + x[1]; }, -5, 5, 2},
      {"sub", [](S x) { return x[0] - x[1]; }, -5, 5, 2},
      {"mul", [](S x) { return x[0] * x[1]; }, -5, 5, 2},
      {"div", [](S x) { return x[0] / x[1]; }, 0.5, 5, 2},
      {"exp", [](S x) { return exp(x[0]); }, -3, 3, 1},
      {"log", [](S x) { return log(x[0]); }, 0.1, 10, 1},
      {"log1p", [](S x) { return log1p(x[0]); }, -0.5, 10, 1},
      {"expm1", [](S x) { return expm1(x[0]); }, -3, 3, 1},
      {"sqrt", [](S x) { return sqrt(x[0]); }, 0.1, 10, 1},
      {"square", [](S x) { return square(x[0]); }, -5, 5, 1},
      {"tanh", [](S x) { return tanh(x[0]); }, -3, 3, 1},
      {"pow", [](S x) { return pow(x[0], x[1]); }, 0.2, 3, 2},
      {"pow_const", [](S x) { return pow(x[0], 2.5); }, 0.2, 3, 1},
      {"inv_logit", [](S x) { return inv_logit(x[0]); }, -8, 8, 1},
      {"logit", [](S x) { return logit(x[0]); }, 0.05, 0.95, 1},
      {"log1p_exp", [](S x) { return log1p_exp(x[0]); }, -20, 20, 1},
      {"log_inv_logit", [](S x) { return log_inv_logit(x[0]); }, -20, 20, 1},
      {"lgamma", [](S x) { return lgamma(x[0]); }, 0.3, 20, 1},
      {"elu", [](S x) { return elu(x[0]); }, -4, 4, 1},
      {"log_tanh_derivative", [](S x) { return log_tanh_derivative(x[0]); }, -10, 10, 1},
      {"sum", [](S x) { return sum(x); }, -5, 5, 3},
      {"dot", [](S x) { return dot(x.subspan(0, 2), x.subspan(2, 2)); }, -5, 5, 4},
      {"log_sum_exp", [](S x) { return log_sum_exp(x); }, -30, 30, 3},
      {"log_sum_exp2", [](S x) { return log_sum_exp(x[0], x[1]); }, -30, 30, 2},
  };
}

TEST(Grad, EveryPrimitiveMatchesFiniteDifferences) {
  Rng rng(1);
  for (const Primitive& p : primitives()) {
    double worst = 0;
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> x(p.arity);
      for (double& xi : x) xi = p.lo + (p.hi - p.lo) * rng.uniform();
      // keep clear of the elu kink
      if (p.name == "elu" && std::fabs(x[0]) < 1e-3) continue;
      worst = std::max(worst, check_grad(p.f, x, 1e-5));
    }
    EXPECT_LT(worst, 1e-6) << p.name;
  }
}

TEST(Grad, Linearity) {
  const ScalarFunction f = [](std::span<const Var> x) { return exp(x[0]) * x[1]; };
  const ScalarFunction g = [](std::span<const Var> x) { return log1p_exp(x[0] - x[1]); };
  const double alpha = 1.7, beta = -0.3;
  const ScalarFunction h = [&](std::span<const Var> x) { return alpha * f(x) + beta * g(x); };
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> x{rng.normal(), rng.normal()};
    const auto gf = grad(f, x), gg = grad(g, x), gh = grad(h, x);
    for (int k = 0; k < 2; ++k) {
      EXPECT_NEAR(gh.gradient[k], alpha * gf.gradient[k] + beta * gg.gradient[k], 1e-12);
    }
  }
}

TEST(CheckGrad, LinearIsExact) {
  const ScalarFunction f = [](std::span<const Var> x) { return 3.0 * x[0] - 2.0 * x[1] + 1.0; };
  EXPECT_LT(check_grad(f, std::vector{0.3, -4.0}, 1e-5), 1e-10);
}

TEST(CheckGrad, DetectsWrongPartial) {
  // sin with a deliberately wrong derivative.
  const ScalarFunction f = [](std::span<const Var> x) {
    return Var::unary(std::sin(x[0].value()), x[0], std::sin(x[0].value()));
  };
  EXPECT_GT(check_grad(f, std::vector{0.7}, 1e-5), 1e-2);
}

TEST(Hessian, Square) {
  for (double x : {-3.0, 0.0, 250.0}) {
    const auto H = hessian([](std::span<const Var> v) { return square(v[0]); }, std::vector{x});
    EXPECT_NEAR(H(0, 0), 2.0, 1e-6);
  }
}

TEST(Hessian, NormalLogDensity) {
  const double sigma = 1.7;
  const auto H = hessian(
      [&](std::span<const Var> v) {
        return -0.5 * square(v[0] / sigma) - std::log(sigma) - 0.5 * std::log(2 * std::numbers::pi);
      },
      std::vector{0.4});
  EXPECT_NEAR(H(0, 0), -1.0 / (sigma * sigma), 1e-8);
}

TEST(Hessian, Bilinear) {
  const auto H =
      hessian([](std::span<const Var> v) { return v[0] * v[1]; }, std::vector{1.0, 1.0});
  EXPECT_NEAR(H(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(H(1, 1), 0.0, 1e-12);
  EXPECT_NEAR(H(0, 1), 1.0, 1e-9);
  EXPECT_EQ(H(0, 1), H(1, 0));
}

TEST(Hessian, SymmetrisationIsSmallCorrection) {
  const ScalarFunction f = [](std::span<const Var> v) {
    return exp(v[0] * v[1]) + log1p_exp(v[2] - v[0]) * v[1];
  };
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    const std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
    const auto raw = hessian_unsymmetrized(f, x);
    const auto sym = hessian(f, x);
    EXPECT_EQ((sym - sym.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((raw - raw.transpose()).cwiseAbs().maxCoeff(),
              1e-4 * raw.cwiseAbs().maxCoeff());
  }
}

TEST(Hessian, DimensionCap) {
  HessianOptions opts;
  opts.max_dim = 2;
  EXPECT_THROW(hessian([](std::span<const Var> v) { return sum(v); }, std::vector{1.0, 2.0, 3.0},
                       opts),
               Unsupported);
}

}  // namespace
}  // namespace stanvi::ad
