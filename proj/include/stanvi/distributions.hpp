// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "stanvi/autodiff.hpp"
#include "stanvi/rng.hpp"
#include "stanvi/transforms.hpp"

namespace stanvi {

enum class DistKind {
  Normal,
  Lognormal,
  StudentT,
  Cauchy,
  Uniform,
  Exponential,
  Gamma,
  Beta,
  Bernoulli,
  BernoulliLogit,
  Binomial,
  Poisson,
  Categorical,
};

inline constexpr int kNumDistributions = 13;

struct DistInfo {
  DistKind kind;
  std::string_view name;
  int num_params;
  bool discrete;
  /// Bit i set when parameter i must be an integer (binomial's trial count).
  unsigned int_params = 0;
  /// Single vector-valued parameter (categorical's probability simplex).
  bool vector_param = false;
};

const DistInfo& info(DistKind kind);
std::optional<DistKind> find_distribution(std::string_view name);

// Log densities and masses keep every normalising constant. Values outside
// the support give -inf; parameters outside their domain throw
// InvalidParameter.

ad::Var log_prob(DistKind kind, const ad::Var& y, std::span<const ad::Var> params);
/// Discrete kinds other than categorical.
ad::Var log_prob(DistKind kind, std::int64_t n, std::span<const ad::Var> params);
/// n is 1-based; theta must be a simplex.
ad::Var categorical_log_prob(std::int64_t n, std::span<const ad::Var> theta);

double log_prob(DistKind kind, double y, std::span<const double> params);

/// One draw. Discrete draws are returned as integral doubles.
///   normal: Rng::normal (Box-Muller)   lognormal: exp of normal
///   student_t: z / sqrt(2 gamma(nu/2) / nu)   cauchy, exponential: inverse CDF
///   gamma: Marsaglia-Tsang   beta: X / (X + Y) from two gammas
///   bernoulli, binomial, poisson: inverse CDF by sequential search
double sample(DistKind kind, std::span<const double> params, Rng& rng);
std::int64_t sample_categorical(std::span<const double> theta, Rng& rng);

/// Constraint a parameter with this prior would need.
ConstraintSpec support(DistKind kind, std::span<const double> params);

}  // namespace stanvi
