// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/svi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stanvi/error.hpp"

namespace stanvi {

ElboEstimate elbo(const BoundModel& model, const Guide& guide, std::span<const double> theta,
                  Rng& rng, int num_particles) {
  if (num_particles < 1) throw std::invalid_argument("elbo: num_particles must be >= 1");
  std::vector<std::vector<double>> noise(num_particles);
  for (auto& n : noise) n = guide.draw_noise(rng);
  const ad::ScalarFunction objective = [&](std::span<const ad::Var> th) {
    ad::Var total = 0.0;
    for (const auto& n : noise) {
      const GuideDraw draw = guide.transport(th, n);
      total += model.log_joint(draw.u) - draw.log_q;
    }
    return total / static_cast<double>(num_particles);
  };
  ad::Gradient g = ad::grad(objective, theta);
  if (!std::isfinite(g.value)) throw NaNDetected("elbo: estimate is not finite");
  return {g.value, std::move(g.gradient)};
}

void adam_step(SVIState& state, std::span<const double> gradient, double step_size) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  const std::size_t n = state.theta.size();
  if (state.adam_m.size() != n) state.adam_m.assign(n, 0.0);
  if (state.adam_v.size() != n) state.adam_v.assign(n, 0.0);
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, state.step);
  const double c2 = 1.0 - std::pow(beta2, state.step);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gradient[i];
    state.adam_m[i] = beta1 * state.adam_m[i] + (1.0 - beta1) * g;
    state.adam_v[i] = beta2 * state.adam_v[i] + (1.0 - beta2) * g * g;
    const double m_hat = state.adam_m[i] / c1;
    const double v_hat = state.adam_v[i] / c2;
    state.theta[i] += step_size * m_hat / (std::sqrt(v_hat) + eps);
  }
}

SampleTable draw_posterior(const BoundModel& model, const Guide& guide,
                           std::span<const double> theta, int n, Rng& rng) {
  SampleTable table;
  table.columns = model.column_names();
  table.rows.reserve(std::max(0, n));
  for (int i = 0; i < n; ++i) {
    const Guide::Draw draw = guide.sample(theta, rng);
    std::vector<double> row = model.output_row(draw.u, rng);
    for (double v : row) {
      if (std::isnan(v)) throw NaNDetected("posterior draw " + std::to_string(i) + " has NaN");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

SVIResult run(const BoundModel& model, const Guide& guide, const SVIConfig& config) {
  SVIResult result{.status = SVIStatus::Ok, .error_step = -1, .error = {}, .theta = {},
                   .loss_trace = {}, .samples = {}, .guide = guide};
  Rng rng(config.seed);
  SVIState state;
  state.theta = guide.init(rng);
  const int every = std::max(1, config.num_steps / 1000);
  int step = 0;
  try {
    for (; step < config.num_steps; ++step) {
      const ElboEstimate e = elbo(model, guide, state.theta, rng, config.num_particles);
      if (step % every == 0) state.loss_trace.push_back({step, -e.value});
      adam_step(state, e.gradient, config.step_size);
    }
  } catch (const Error& e) {
    result.status = SVIStatus::NanError;
    result.error_step = step;
    result.error = e.what();
  }
  result.theta = state.theta;
  result.loss_trace = std::move(state.loss_trace);
  if (result.status != SVIStatus::Ok) return result;
  try {
    if (guide.kind() == GuideKind::LaplaceApproximation) {
      result.guide = laplace_finalize(guide, model, state.theta);
    }
    result.samples = draw_posterior(model, result.guide, state.theta, config.num_samples, rng);
  } catch (const Error& e) {
    result.status = SVIStatus::NanError;
    result.error = e.what();
  }
  result.samples.metadata["seed"] = std::to_string(config.seed);
  result.samples.metadata["guide"] = std::string(to_string(guide.kind()));
  result.samples.metadata["num_steps"] = std::to_string(config.num_steps);
  return result;
}

}  // namespace stanvi
