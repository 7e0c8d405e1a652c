// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stanvi/guides.hpp"
#include "stanvi/model.hpp"
#include "stanvi/rng.hpp"
#include "stanvi/sample_table.hpp"

namespace stanvi {

struct SVIConfig {
  int num_steps = 100000;
  int num_samples = 10000;
  double step_size = 0.0005;
  int num_particles = 1;
  std::uint64_t seed = 0;
};

struct LossPoint {
  int step;
  double loss;  // -ELBO estimate
};

struct SVIState {
  int step = 0;
  std::vector<double> theta;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::vector<LossPoint> loss_trace;
};

struct ElboEstimate {
  double value = 0.0;
  std::vector<double> gradient;  // with respect to theta
};

/// Monte Carlo ELBO over num_particles reparameterised draws and its
/// pathwise gradient. Throws NaNDetected when the estimate is not finite or
/// the gradient has a NaN.
ElboEstimate elbo(const BoundModel& model, const Guide& guide, std::span<const double> theta,
                  Rng& rng, int num_particles = 1);

/// One Adam ascent step on the ELBO (beta1 0.9, beta2 0.999, eps 1e-8, bias
/// corrected).
void adam_step(SVIState& state, std::span<const double> gradient, double step_size);

enum class SVIStatus { Ok, NanError };

struct SVIResult {
  SVIStatus status = SVIStatus::Ok;
  int error_step = -1;  // step of the first NaN, -1 when sampling failed
  std::string error;
  std::vector<double> theta;
  std::vector<LossPoint> loss_trace;
  SampleTable samples;
  Guide guide;  // finalized for Laplace
};

/// num_steps Adam steps from guide.init, then num_samples posterior draws.
/// Laplace runs the steps as a MAP search and finalizes before sampling.
/// Failures are reported in the status, never thrown.
SVIResult run(const BoundModel& model, const Guide& guide, const SVIConfig& config);

/// n guide draws mapped to constrained space, with transformed parameters
/// and generated quantities appended. Throws NaNDetected.
SampleTable draw_posterior(const BoundModel& model, const Guide& guide,
                           std::span<const double> theta, int n, Rng& rng);

}  // namespace stanvi
