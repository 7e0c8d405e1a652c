// Apache License, Version 2.0, refer to LICENSE.txt

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "stanvi/error.hpp"
#include "stanvi/svi.hpp"

namespace stanvi {
namespace {

namespace fs = std::filesystem;
const fs::path kRoot = STANVI_SOURCE_DIR;
constexpr double kY = 1.3;

BoundModel conjugate() {
  return compile_file(kRoot / "tests" / "models" / "normal_normal.stan")
      .bind(parse_data(R"({"y": 1.3})"));
}

// log N(y | 0, 2): the evidence of the conjugate model
double log_evidence() { return -0.25 * kY * kY - 0.5 * std::log(2 * std::numbers::pi * 2); }

TEST(Elbo, DeltaIsTheLogJoint) {
  const BoundModel m = conjugate();
  const Guide g = synthesize(GuideKind::Delta, m);
  Rng rng(0);
  for (int p : {1, 3}) {
    const std::vector<double> theta{0.4};
    const ElboEstimate e = elbo(m, g, theta, rng, p);
    EXPECT_DOUBLE_EQ(e.value, m.log_joint(theta));
    EXPECT_NEAR(e.gradient[0], -0.4 + (kY - 0.4), 1e-12);
  }
}

TEST(Elbo, ExactPosteriorGivesTheEvidence) {
  // q = N(y/2, 1/2) is the posterior, so log p(y, z) - log q(z) = log p(y) for every z
  const BoundModel m = conjugate();
  const Guide g = synthesize(GuideKind::DiagonalNormal, m);
  const std::vector<double> theta{kY / 2, 0.5 * std::log(0.5)};
  Rng rng(1);
  const int n = 100000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = elbo(m, g, theta, rng).value;
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt(std::max(0.0, sum2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, log_evidence(), 3 * se + 1e-9);
}

TEST(Elbo, GuideEqualToTargetGivesZero) {
  const BoundModel m =
      compile_source("parameters { vector[3] z; } model { z ~ normal(0, 1); }").bind({});
  const Guide g = synthesize(GuideKind::DiagonalNormal, m);
  const std::vector<double> theta(6, 0.0);
  Rng rng(2);
  double sum = 0;
  for (int i = 0; i < 1000; ++i) sum += elbo(m, g, theta, rng).value;
  EXPECT_NEAR(sum / 1000, 0.0, 1e-12);
}

TEST(Elbo, RunningMeanBelowEvidence) {
  const BoundModel m = conjugate();
  const Guide g = synthesize(GuideKind::DiagonalNormal, m);
  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    const std::vector<double> theta{rng.normal(), 0.5 * rng.normal()};
    const int n = 20000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
      const double v = elbo(m, g, theta, rng).value;
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    EXPECT_LE(mean, log_evidence() + 3 * se);
  }
}

TEST(Elbo, GradientMatchesFiniteDifferencesForFixedNoise) {
  const BoundModel m = conjugate();
  const Guide g = synthesize(GuideKind::MultivariateNormal, m);
  const std::vector<double> theta{0.2, -0.3};
  const double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    Rng a(7), b(7), c(7);
    auto up = theta, dn = theta;
    up[i] += h;
    dn[i] -= h;
    const double fd = (elbo(m, g, up, a, 2).value - elbo(m, g, dn, b, 2).value) / (2 * h);
    EXPECT_NEAR(elbo(m, g, theta, c, 2).gradient[i], fd, 1e-6);
  }
}

TEST(Adam, ZeroGradient) {
  SVIState s;
  s.theta = {1.0, -2.0};
  adam_step(s, std::vector{0.0, 0.0}, 0.1);
  EXPECT_EQ(s.theta, (std::vector{1.0, -2.0}));
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, FirstStep) {
  SVIState s;
  s.theta = {0.0, 0.0, 0.0};
  const std::vector<double> g{3.0, -1e-3, 1e-9};
  adam_step(s, g, 5e-4);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(s.theta[i], 5e-4 * g[i] / (std::abs(g[i]) + 1e-8), 1e-18);
  }
}

TEST(Adam, UpdatesAreBounded) {
  SVIState s;
  s.theta = {0.0, 1.0};
  adam_step(s, std::vector{10.0, -0.01}, 5e-4);
  adam_step(s, std::vector{-10.0, 0.01}, 5e-4);
  EXPECT_LT(std::abs(s.theta[0]), 2 * 5e-4);
  EXPECT_LT(std::abs(s.theta[1] - 1.0), 2 * 5e-4);
  EXPECT_EQ(s.adam_m.size(), 2u);
}

TEST(Svi, ZeroStepsDelta) {
  const BoundModel m = conjugate();
  const SVIResult r =
      run(m, synthesize(GuideKind::Delta, m), SVIConfig{.num_steps = 0, .num_samples = 5});
  ASSERT_EQ(r.status, SVIStatus::Ok);
  EXPECT_EQ(r.theta, std::vector{0.0});
  EXPECT_EQ(r.samples.columns, std::vector<std::string>{"mu"});
  ASSERT_EQ(r.samples.num_rows(), 5);
  for (const auto& row : r.samples.rows) EXPECT_EQ(row, std::vector{0.0});
  EXPECT_TRUE(r.loss_trace.empty());
}

TEST(Svi, ConjugateRecovery) {
  const BoundModel m = conjugate();
  const SVIResult r = run(m, synthesize(GuideKind::DiagonalNormal, m),
                          SVIConfig{.num_steps = 20000, .num_samples = 10000, .seed = 4});
  ASSERT_EQ(r.status, SVIStatus::Ok);
  const auto mu = r.samples.column("mu");
  double mean = 0;
  for (double v : mu) mean += v;
  mean /= mu.size();
  EXPECT_NEAR(mean, kY / 2, 0.05);
  EXPECT_NEAR(r.theta[0], kY / 2, 0.05);
  EXPECT_NEAR(std::exp(r.theta[1]), std::sqrt(0.5), 0.1);
}

TEST(Svi, LossTrace) {
  const BoundModel m = conjugate();
  const SVIResult r =
      run(m, synthesize(GuideKind::DiagonalNormal, m), SVIConfig{.num_steps = 5000, .num_samples = 1});
  ASSERT_EQ(r.loss_trace.size(), 1000u);  // every 5 steps
  for (std::size_t i = 1; i < r.loss_trace.size(); ++i) {
    EXPECT_EQ(r.loss_trace[i].step, r.loss_trace[i - 1].step + 5);
  }
  const SVIResult few =
      run(m, synthesize(GuideKind::DiagonalNormal, m), SVIConfig{.num_steps = 7, .num_samples = 1});
  EXPECT_EQ(few.loss_trace.size(), 7u);
}

TEST(Svi, SeedDeterminism) {
  const BoundModel m = compile_file(kRoot / "models" / "eight_schools.stan")
                           .bind(load_data(kRoot / "models" / "eight_schools.data.json"));
  for (GuideKind k : {GuideKind::IAFNormal, GuideKind::LowRankMultivariateNormal}) {
    const SVIConfig c{.num_steps = 300, .num_samples = 50, .seed = 9};
    const SVIResult a = run(m, synthesize(k, m), c);
    const SVIResult b = run(m, synthesize(k, m), c);
    std::ostringstream sa, sb;
    write_csv(a.samples, sa);
    write_csv(b.samples, sb);
    EXPECT_EQ(sa.str(), sb.str());
    ASSERT_EQ(a.loss_trace.size(), b.loss_trace.size());
    for (std::size_t i = 0; i < a.loss_trace.size(); ++i) {
      EXPECT_EQ(a.loss_trace[i].loss, b.loss_trace[i].loss);
    }
    const SVIResult other = run(m, synthesize(k, m), SVIConfig{.num_steps = 300, .num_samples = 50, .seed = 10});
    EXPECT_NE(other.samples.rows, a.samples.rows);
  }
}

TEST(Svi, NanBecomesStatus) {
  const BoundModel m =
      compile_source("parameters { real a; } model { target += log(a - 100); }").bind({});
  const SVIResult r = run(m, synthesize(GuideKind::DiagonalNormal, m),
                          SVIConfig{.num_steps = 10, .num_samples = 10});
  EXPECT_EQ(r.status, SVIStatus::NanError);
  EXPECT_EQ(r.error_step, 0);
  EXPECT_FALSE(r.error.empty());
}

TEST(Svi, LaplaceFinalizesAfterTheMapSearch) {
  const BoundModel m = conjugate();
  const SVIResult r = run(m, synthesize(GuideKind::LaplaceApproximation, m),
                          SVIConfig{.num_steps = 20000, .num_samples = 20000, .seed = 5});
  ASSERT_EQ(r.status, SVIStatus::Ok);
  EXPECT_TRUE(r.guide.finalized());
  EXPECT_NEAR(r.guide.laplace_mean()[0], kY / 2, 1e-3);
  EXPECT_NEAR(r.guide.laplace_cholesky()(0, 0), std::sqrt(0.5), 1e-4);
}

TEST(DrawPosterior, DeltaRowsAreTheConstrainedPoint) {
  const BoundModel m =
      compile_source("parameters { real<lower=0> s; vector[2] b; } model { s ~ exponential(1); }")
          .bind({});
  const Guide g = synthesize(GuideKind::Delta, m);
  const std::vector<double> theta{0.5, 1.0, -1.0};
  Rng rng(0);
  const SampleTable t = draw_posterior(m, g, theta, 4, rng);
  EXPECT_EQ(t.columns, (std::vector<std::string>{"s", "b.1", "b.2"}));
  for (const auto& row : t.rows) EXPECT_EQ(row, (std::vector{std::exp(0.5), 1.0, -1.0}));
}

TEST(DrawPosterior, MeansAndConstraints) {
  const BoundModel m =
      compile_source("parameters { real a; real<lower=0> s; } model { }").bind({});
  const Guide g = synthesize(GuideKind::DiagonalNormal, m);
  const std::vector<double> theta{1.5, -0.5, std::log(2.0), std::log(0.7)};
  Rng rng(6);
  const int n = 100000;
  const SampleTable t = draw_posterior(m, g, theta, n, rng);
  double mean_a = 0, mean_log_s = 0;
  for (const auto& row : t.rows) {
    mean_a += row[0];
    ASSERT_GT(row[1], 0.0);
    mean_log_s += std::log(row[1]);
  }
  EXPECT_NEAR(mean_a / n, 1.5, 4 * 2.0 / std::sqrt(n));
  EXPECT_NEAR(mean_log_s / n, -0.5, 4 * 0.7 / std::sqrt(n));
}

TEST(SampleTables, CsvRoundTrip) {
  SampleTable t;
  t.columns = {"theta", "beta.1", "beta.2"};
  t.rows = {{0.1, -2.5e-300, 1.0 / 3.0},
            {std::numeric_limits<double>::infinity(), 1e300, -0.0},
            {std::nan(""), 42, 7}};
  t.metadata["seed"] = "3";
  std::stringstream s;
  write_csv(t, s);
  const SampleTable back = read_csv(s);
  EXPECT_EQ(back.columns, t.columns);
  EXPECT_EQ(back.metadata, t.metadata);
  ASSERT_EQ(back.num_rows(), 3);
  EXPECT_EQ(back.rows[0], t.rows[0]);
  EXPECT_EQ(back.rows[1], t.rows[1]);
  EXPECT_TRUE(std::isnan(back.rows[2][0]));
  EXPECT_TRUE(back.has_nan());
  EXPECT_EQ(back.column("beta.2")[0], 1.0 / 3.0);
  EXPECT_THROW(back.column("gamma"), MissingParameter);
}

TEST(SampleTables, Malformed) {
  std::stringstream ragged("a,b\n1,2\n3\n");
  EXPECT_THROW(read_csv(ragged), ParseError);
  std::stringstream bad("a\nx1\n");
  EXPECT_THROW(read_csv(bad), ParseError);
  std::stringstream empty("# only=metadata\n");
  EXPECT_THROW(read_csv(empty), ParseError);
  std::stringstream crlf("a,b\r\n1,2\r\n");
  EXPECT_EQ(read_csv(crlf).rows[0], (std::vector{1.0, 2.0}));
}

}  // namespace
}  // namespace stanvi
