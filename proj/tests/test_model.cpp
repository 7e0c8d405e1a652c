// Apache License, Version 2.0, refer to LICENSE.txt

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "stanvi/error.hpp"
#include "stanvi/model.hpp"

namespace stanvi {
namespace {

namespace fs = std::filesystem;

const fs::path kRoot = STANVI_SOURCE_DIR;

// Independent closed form, written out here rather than taken from the
// distributions module.
double normal_lpdf(double y, double mu, double sigma) {
  const double z = (y - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2 * std::numbers::pi);
}

BoundModel bind_source(const std::string& src, const std::string& json = "{}") {
  return compile_source(src).bind(parse_data(json));
}

BoundModel corpus_model(const std::string& name) {
  return compile_file(kRoot / "models" / (name + ".stan"))
      .bind(load_data(kRoot / "models" / (name + ".data.json")));
}

TEST(Model, MultimodalLayout) {
  const BoundModel m = corpus_model("multimodal");
  ASSERT_EQ(m.dim(), 2);
  const auto& e = m.layout().entries;
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].name, "cluster");
  EXPECT_EQ(e[0].offset, 0);
  EXPECT_EQ(e[0].length, 1);
  EXPECT_EQ(e[0].constraint.kind, TransformKind::Identity);
  EXPECT_EQ(e[1].name, "theta");
  EXPECT_EQ(e[1].offset, 1);
  EXPECT_EQ(e[1].length, 1);
}

TEST(Model, ConstrainedLayouts) {
  const BoundModel a = bind_source("parameters { real<lower=0> sigma; } model { }");
  EXPECT_EQ(a.dim(), 1);
  EXPECT_EQ(a.layout().entries[0].constraint, ConstraintSpec::lower_bound(0));

  const BoundModel b = bind_source("parameters { simplex[3] p; } model { }");
  EXPECT_EQ(b.dim(), 2);

  const BoundModel c = bind_source(
      "data { int K; } parameters { ordered[K] o; array[2] simplex[4] s;"
      " real<lower=-1, upper=1> r; vector<lower=0>[K] v; } model { }",
      R"({"K": 3})");
  ASSERT_EQ(c.layout().entries.size(), 4u);
  EXPECT_EQ(c.layout().entries[0].length, 3);
  EXPECT_EQ(c.layout().entries[1].length, 6);
  EXPECT_EQ(c.layout().entries[2].length, 1);
  EXPECT_EQ(c.layout().entries[3].length, 3);
  EXPECT_EQ(c.dim(), 13);
  int expected_offset = 0;
  for (const auto& e : c.layout().entries) {
    EXPECT_EQ(e.offset, expected_offset);
    expected_offset += e.length;
  }
}

TEST(Model, MultimodalLogJoint) {
  const BoundModel m = corpus_model("multimodal");
  const double at_upper = m.log_joint(std::vector{1.0, 20.0});
  EXPECT_NEAR(at_upper, normal_lpdf(1, 0, 1) + normal_lpdf(20, 20, 1), 1e-12);
  EXPECT_NEAR(at_upper, -std::log(2 * std::numbers::pi) - 0.5, 1e-12);
  EXPECT_NEAR(at_upper, -2.337877, 1e-6);
  const double at_origin = m.log_joint(std::vector{0.0, 0.0});
  EXPECT_NEAR(at_origin, 2 * normal_lpdf(0, 0, 1), 1e-12);
  EXPECT_NEAR(at_origin, -1.837877, 1e-6);
}

TEST(Model, MultimodalIsPiecewise) {
  const BoundModel m = corpus_model("multimodal");
  for (double c : {-1e-9, -1e-3, -0.7, 1e-9, 1e-3, 0.7}) {
    for (double theta : {-2.0, 0.0, 10.0, 19.5, 21.0}) {
      const double mu = c > 0 ? 20.0 : 0.0;
      EXPECT_NEAR(m.log_joint(std::vector{c, theta}),
                  normal_lpdf(c, 0, 1) + normal_lpdf(theta, mu, 1), 1e-10)
          << c << " " << theta;
    }
  }
}

TEST(Model, EmptyModelIsZero) {
  const BoundModel m = bind_source("parameters { real a; vector[2] b; } model { }");
  for (double x : {-3.0, 0.0, 5.0}) EXPECT_EQ(m.log_joint(std::vector{x, -x, 2 * x}), 0.0);
}

TEST(Model, JacobianAdded) {
  // sigma ~ exponential(1) on u = log sigma: log p(e^u) + u
  const BoundModel m =
      bind_source("parameters { real<lower=0> sigma; } model { sigma ~ exponential(1); }");
  for (double u : {-2.0, 0.0, 1.3}) {
    EXPECT_NEAR(m.log_joint(std::vector{u}), -std::exp(u) + u, 1e-12);
  }
}

TEST(Model, VectorisedEqualsScalarExpansion) {
  const std::string vec =
      "data { int N; vector[N] y; } parameters { vector[N] mu; real<lower=0> s; }"
      " model { mu ~ normal(0, 2); y ~ normal(mu, s); s ~ gamma(2, 1); }";
  const std::string loop =
      "data { int N; vector[N] y; } parameters { vector[N] mu; real<lower=0> s; }"
      " model { for (i in 1:N) { mu[i] ~ normal(0, 2); y[i] ~ normal(mu[i], s); }"
      " s ~ gamma(2, 1); }";
  const std::string data = R"({"N": 5, "y": [0.3, -1.2, 2.5, 0.0, 4.1]})";
  const BoundModel a = bind_source(vec, data);
  const BoundModel b = bind_source(loop, data);
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> u(a.dim());
    for (double& x : u) x = rng.normal();
    EXPECT_NEAR(a.log_joint(u), b.log_joint(u), 1e-10);
  }
}

TEST(Model, Broadcasting) {
  // scalar outcome against a vector location broadcasts the outcome
  const BoundModel m = bind_source(
      "data { vector[3] m; } parameters { real x; } model { target += normal_lpdf(x | m, 1); }",
      R"({"m": [0, 1, 2]})");
  EXPECT_NEAR(m.log_joint(std::vector{0.5}),
              normal_lpdf(0.5, 0, 1) + normal_lpdf(0.5, 1, 1) + normal_lpdf(0.5, 2, 1), 1e-12);
  const BoundModel bad = bind_source(
      "data { vector[3] m; vector[2] y; } parameters { real x; } model { y ~ normal(m, 1); }",
      R"({"m": [0, 1, 2], "y": [1, 2]})");
  EXPECT_THROW(bad.log_joint(std::vector{0.0}), EvalError);
}

TEST(Model, OutOfSupportObservationIsNegInf) {
  const BoundModel m =
      bind_source("data { real y; } parameters { real a; } model { y ~ exponential(1); }",
                  R"({"y": -1})");
  EXPECT_EQ(m.log_joint(std::vector{0.0}), -std::numeric_limits<double>::infinity());
}

TEST(Model, NaNIsAnError) {
  const BoundModel bad_scale =
      bind_source("parameters { real a; } model { a ~ normal(0, a); }");
  EXPECT_THROW(bad_scale.log_joint(std::vector{-1.0}), NaNDetected);
  const BoundModel bad_log = bind_source("parameters { real a; } model { target += log(a); }");
  EXPECT_THROW(bad_log.log_joint(std::vector{-1.0}), NaNDetected);
}

TEST(Model, TransformedParameterConstraintRejects) {
  const BoundModel m = bind_source(
      "parameters { real a; } transformed parameters { real<lower=0> b = a; }"
      " model { a ~ normal(0, 1); }");
  EXPECT_TRUE(std::isfinite(m.log_joint(std::vector{0.5})));
  EXPECT_EQ(m.log_joint(std::vector{-0.5}), -std::numeric_limits<double>::infinity());
}

double gq_value(const BoundModel& m, const std::string& name, std::span<const double> draw,
                std::uint64_t seed = 0) {
  Rng rng(seed);
  for (const NamedValue& nv : m.run_generated_quantities(draw, rng)) {
    if (nv.name == name) return nv.values.at(0);
  }
  ADD_FAILURE() << "no quantity " << name;
  return 0;
}

TEST(Model, ControlFlowAndIndexing) {
  const BoundModel m = bind_source(
      "data { int N; array[N] int g; array[2] int h; matrix[2, 3] X; }"
      " transformed data { int q = -7 / 2; int r = -7 % 2; real s = 0;"
      "   for (i in 1:N) s += g[i] * X[1, i];"
      "   if (q == -3 && r == -1) s = s * 10; else s = -1; }"
      " parameters { real a; }"
      " model { }"
      " generated quantities { real out = s; real x23 = X[2][3]; int qq = q;"
      "   row_vector[2] picked = X[2][h]; vector[3] w = rep_vector(0, 3);"
      "   w[2] = 5; w[3] += 1; }",
      R"({"N": 3, "g": [1, 2, 3], "h": [3, 1], "X": [[1, 2, 3], [4, 5, 6]]})");
  const std::vector<double> draw{0.0};
  EXPECT_EQ(gq_value(m, "out", draw), 140.0);  // (1 + 4 + 9) * 10
  EXPECT_EQ(gq_value(m, "x23", draw), 6.0);
  EXPECT_EQ(gq_value(m, "qq", draw), -3.0);  // truncating division
  Rng rng(0);
  const auto gq = m.run_generated_quantities(draw, rng);
  EXPECT_EQ(gq[3].values, (std::vector<double>{6.0, 4.0}));
  EXPECT_EQ(gq[4].values, (std::vector<double>{0.0, 5.0, 1.0}));
  const auto names = m.column_names();
  const std::vector<std::string> want{"a",        "out",      "x23",   "qq",    "picked.1",
                                      "picked.2", "w.1",      "w.2",   "w.3"};
  EXPECT_EQ(names, want);
}

TEST(Model, IndexOutOfRange) {
  const BoundModel m = bind_source(
      "data { vector[2] v; } parameters { real a; } model { target += v[3]; }",
      R"({"v": [1, 2]})");
  EXPECT_THROW(m.log_joint(std::vector{0.0}), EvalError);
}

TEST(Model, GeneratedQuantities) {
  const BoundModel two = bind_source("parameters { real mu; } model { }"
                                     " generated quantities { real two = 2; }");
  EXPECT_EQ(gq_value(two, "two", std::vector{0.0}), 2.0);

  const BoundModel sq = bind_source("parameters { real mu; } model { }"
                                    " generated quantities { real mu2 = square(mu); }");
  EXPECT_EQ(gq_value(sq, "mu2", std::vector{3.0}), 9.0);

  // normal_rng against the documented Box-Muller construction
  const BoundModel r = bind_source("parameters { real mu; } model { }"
                                   " generated quantities { real z = normal_rng(0, 1); }");
  Rng raw(17);
  const double u1 = raw.uniform(), u2 = raw.uniform();
  const double expected = std::sqrt(-2 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
  EXPECT_EQ(gq_value(r, "z", std::vector{0.0}, 17), expected);
}

TEST(Model, OutputRowOrder) {
  const BoundModel m = corpus_model("linear_regression");
  const std::vector<std::string> want{"alpha", "beta.1", "beta.2", "beta.3", "sigma", "y_rep1"};
  EXPECT_EQ(m.column_names(), want);
  EXPECT_EQ(m.parameter_names(), std::vector<std::string>(want.begin(), want.end() - 1));
  Rng rng(1);
  const std::vector<double> u{0.1, 0.2, 0.3, 0.4, std::log(2.0)};
  const auto row = m.output_row(u, rng);
  ASSERT_EQ(row.size(), 6u);
  EXPECT_DOUBLE_EQ(row[4], 2.0);
  EXPECT_TRUE(std::isfinite(row[5]));

  const BoundModel es = corpus_model("eight_schools");
  const auto names = es.column_names();
  EXPECT_EQ(names.front(), "mu");
  EXPECT_EQ(names.back(), "theta.8");
  EXPECT_EQ(names.size(), 2u + 8u + 8u);
}

TEST(Model, EightSchoolsTransformedParameter) {
  const BoundModel es = corpus_model("eight_schools");
  const DataBindings data = load_data(kRoot / "models" / "eight_schools.data.json");
  Rng rng(2);
  std::vector<double> u(es.dim());
  for (double& x : u) x = rng.normal();
  const double mu = u[0], tau = std::exp(u[1]);
  double want = normal_lpdf(mu, 0, 5) + std::log(tau) + u[1] -
                std::log(std::numbers::pi * 5 * (1 + (tau / 5) * (tau / 5))) - std::log(tau);
  // log cauchy(tau | 0, 5) = -log(pi * 5 * (1 + (tau/5)^2)); Jacobian of exp is +u[1]
  want = normal_lpdf(mu, 0, 5) - std::log(std::numbers::pi * 5 * (1 + (tau / 5) * (tau / 5))) +
         u[1];
  for (int j = 0; j < 8; ++j) {
    const double tt = u[2 + j];
    want += normal_lpdf(tt, 0, 1);
    want += normal_lpdf(data.at("y").values[j], mu + tau * tt, data.at("sigma").values[j]);
  }
  EXPECT_NEAR(es.log_joint(u), want, 1e-10);
}

TEST(Model, MixtureMatchesOracle) {
  const BoundModel mix = corpus_model("mixture");
  const DataBindings data = load_data(kRoot / "models" / "mixture.data.json");
  const std::vector<double> u{0.4, -1.0, 0.8, -0.3};
  // simplex[2] from one stick-breaking coordinate: w1 = inv_logit(u0 + log(1/1))
  const double w1 = 1 / (1 + std::exp(-u[0]));
  const double mu1 = u[1], mu2 = u[1] + std::exp(u[2]), sigma = std::exp(u[3]);
  double want = std::log(w1) + std::log(1 - w1);  // stick-breaking Jacobian
  want += u[2] + u[3];                            // ordered and lower-bound Jacobians
  const double lsig = std::log(sigma);
  want += -lsig - 0.5 * std::log(2 * std::numbers::pi) - 0.5 * lsig * lsig;  // lognormal
  want += normal_lpdf(mu1, 0, 5) + normal_lpdf(mu2, 0, 5);
  for (double y : data.at("y").values) {
    const double a = std::log(w1) + normal_lpdf(y, mu1, sigma);
    const double b = std::log(1 - w1) + normal_lpdf(y, mu2, sigma);
    const double m = std::max(a, b);
    want += m + std::log(std::exp(a - m) + std::exp(b - m));
  }
  EXPECT_NEAR(mix.log_joint(u), want, 1e-9);
}

TEST(Model, CorpusGradients) {
  for (const char* name : {"multimodal", "eight_schools", "linear_regression", "mixture"}) {
    const BoundModel m = corpus_model(name);
    const auto f = m.log_joint_function();
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> u(m.dim());
      for (double& x : u) x = rng.normal();
      EXPECT_LT(ad::check_grad(f, u, 1e-5), 1e-5) << name;
    }
  }
  const BoundModel fig = corpus_model("multimodal");
  const auto g = ad::grad(fig.log_joint_function(), std::vector{1.0, 19.0});
  EXPECT_NEAR(g.gradient[0], -1.0, 1e-9);
  EXPECT_NEAR(g.gradient[1], 1.0, 1e-9);
}

TEST(Model, PinnedBranchesGiveTheTakenBranchHessian) {
  const BoundModel fig = corpus_model("multimodal");
  const std::vector<double> kink{0.0, 0.0};
  const Eigen::MatrixXd free = ad::hessian(fig.log_joint_function(), kink);
  EXPECT_GT(std::abs(free(0, 1)), 1e3);  // the difference straddles cluster > 0
  const Eigen::MatrixXd pinned = ad::hessian(fig.pinned_log_joint_function(kink), kink);
  EXPECT_NEAR(pinned(0, 0), -1.0, 1e-6);
  EXPECT_NEAR(pinned(1, 1), -1.0, 1e-6);
  EXPECT_NEAR(pinned(0, 1), 0.0, 1e-6);
  // pinned at the upper branch, theta's mean is 20 even where cluster < 0
  const auto upper = fig.pinned_log_joint_function(std::vector{0.5, 0.0});
  EXPECT_NEAR(ad::evaluate(upper, std::vector{-0.5, 20.0}), normal_lpdf(-0.5, 0, 1) + normal_lpdf(20, 20, 1),
              1e-12);
}

TEST(Model, Deterministic) {
  const BoundModel m = corpus_model("mixture");
  const std::vector<double> u{0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(m.log_joint(u), m.log_joint(u));
}

TEST(Model, ConstrainRoundTrip) {
  const BoundModel m = corpus_model("mixture");
  const std::vector<double> u{0.4, -1.0, 0.8, -0.3};
  const auto x = m.constrain(u);
  ASSERT_EQ(x.size(), 5u);
  EXPECT_NEAR(x[0] + x[1], 1.0, 1e-15);
  EXPECT_LT(x[2], x[3]);
  const auto back = m.unconstrain(x);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(back[i], u[i], 1e-10);
}

// ---- data --------------------------------------------------------------------------

TEST(Data, EmptyObjectForModelWithoutData) {
  EXPECT_TRUE(parse_data("{}").empty());
  EXPECT_NO_THROW(corpus_model("multimodal"));
}

TEST(Data, ScalarsAndVectors) {
  const DataBindings d = parse_data(R"({"N": 3, "y": [1.0, 2.0, 3.0]})");
  EXPECT_TRUE(d.at("N").dims.empty());
  EXPECT_TRUE(d.at("N").integral);
  EXPECT_EQ(d.at("N").values, std::vector<double>{3});
  EXPECT_EQ(d.at("y").dims, std::vector<std::size_t>{3});
  EXPECT_FALSE(d.at("y").integral);
  const BoundModel m = bind_source(
      "data { int N; vector[N] y; } parameters { real a; } model { y ~ normal(a, 1); }",
      R"({"N": 3, "y": [1.0, 2.0, 3.0]})");
  EXPECT_NEAR(m.log_joint(std::vector{0.0}),
              normal_lpdf(1, 0, 1) + normal_lpdf(2, 0, 1) + normal_lpdf(3, 0, 1), 1e-12);
}

TEST(Data, SchemaMismatches) {
  const std::string src = "data { int N; vector[N] y; } model { }";
  EXPECT_THROW(bind_source(src, R"({"N": 2, "y": [1.0]})"), SchemaMismatch);
  EXPECT_THROW(bind_source(src, R"({"N": 2})"), SchemaMismatch);
  EXPECT_THROW(bind_source(src, R"({"N": 2.5, "y": [1.0, 2.0]})"), SchemaMismatch);
  EXPECT_THROW(bind_source(src, R"({"N": 1, "y": [[1.0]]})"), SchemaMismatch);
  EXPECT_THROW(bind_source("data { int<lower=0> N; } model { }", R"({"N": -1})"), SchemaMismatch);
  EXPECT_THROW(bind_source("data { simplex[2] p; } model { }", R"({"p": [0.5, 0.6]})"),
               SchemaMismatch);
  EXPECT_NO_THROW(bind_source("data { simplex[2] p; } model { }", R"({"p": [0.25, 0.75]})"));
  // ints promote to reals, extra entries are ignored
  EXPECT_NO_THROW(bind_source(src, R"({"N": 2, "y": [1, 2], "unused": 7})"));
  // an empty array stands for any zero-length shape
  EXPECT_NO_THROW(bind_source("data { int N; matrix[N, 3] X; } model { }",
                              R"({"N": 0, "X": []})"));
}

TEST(Data, MatricesAreRowMajor) {
  const BoundModel m = bind_source(
      "data { matrix[2, 3] X; array[2] vector[2] v; } parameters { real a; } model { }"
      " generated quantities { real x12 = X[1, 2]; real x21 = X[2, 1]; real v21 = v[2][1]; }",
      R"({"X": [[1, 2, 3], [4, 5, 6]], "v": [[7, 8], [9, 10]]})");
  EXPECT_EQ(gq_value(m, "x12", std::vector{0.0}), 2.0);
  EXPECT_EQ(gq_value(m, "x21", std::vector{0.0}), 4.0);
  EXPECT_EQ(gq_value(m, "v21", std::vector{0.0}), 9.0);
}

TEST(Data, ParseErrors) {
  EXPECT_THROW(parse_data("{"), ParseError);
  EXPECT_THROW(parse_data("[1, 2]"), ParseError);
  EXPECT_THROW(parse_data(R"({"y": [[1, 2], [3]]})"), ParseError);
  EXPECT_THROW(parse_data(R"({"y": [1, [2]]})"), ParseError);
  EXPECT_THROW(parse_data(R"({"y": true})"), ParseError);
  EXPECT_THROW(parse_data(R"({"y": "hello"})"), ParseError);
  const DataBindings d = parse_data(R"({"y": ["NaN", "-Infinity", 1]})");
  EXPECT_TRUE(std::isnan(d.at("y").values[0]));
  EXPECT_EQ(d.at("y").values[1], -std::numeric_limits<double>::infinity());
  EXPECT_THROW(load_data(kRoot / "no_such_file.json"), ParseError);
}

}  // namespace
}  // namespace stanvi
