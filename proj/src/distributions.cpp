// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/distributions.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "stanvi/error.hpp"

namespace stanvi {

namespace {

using ad::Var;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 log(2 pi)
constexpr double kLogPi = 1.14472988584940017414;

constexpr std::array<DistInfo, kNumDistributions> kInfo = {{
    {DistKind::Normal, "normal", 2, false},
    {DistKind::Lognormal, "lognormal", 2, false},
    {DistKind::StudentT, "student_t", 3, false},
    {DistKind::Cauchy, "cauchy", 2, false},
    {DistKind::Uniform, "uniform", 2, false},
    {DistKind::Exponential, "exponential", 1, false},
    {DistKind::Gamma, "gamma", 2, false},
    {DistKind::Beta, "beta", 2, false},
    {DistKind::Bernoulli, "bernoulli", 1, true},
    {DistKind::BernoulliLogit, "bernoulli_logit", 1, true},
    {DistKind::Binomial, "binomial", 2, true, 1u},
    {DistKind::Poisson, "poisson", 1, true},
    {DistKind::Categorical, "categorical", 1, true, 0u, true},
}};

[[noreturn]] void invalid(DistKind kind, const char* what, double v) {
  throw InvalidParameter(std::string(info(kind).name) + ": " + what + " = " +
                         std::to_string(v));
}

void require_positive(DistKind kind, const char* what, double v) {
  if (!(v > 0.0) || std::isinf(v)) invalid(kind, what, v);
}

void require_finite(DistKind kind, const char* what, double v) {
  if (!std::isfinite(v)) invalid(kind, what, v);
}

void require_probability(DistKind kind, double p) {
  if (!(p >= 0.0 && p <= 1.0)) invalid(kind, "probability", p);
}

double lchoose(std::int64_t n, std::int64_t k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

std::int64_t require_integer(DistKind kind, const char* what, double v) {
  if (!(v >= 0.0) || v != std::floor(v)) invalid(kind, what, v);
  return static_cast<std::int64_t>(v);
}

}  // namespace

const DistInfo& info(DistKind kind) { return kInfo[static_cast<int>(kind)]; }

std::optional<DistKind> find_distribution(std::string_view name) {
  for (const DistInfo& d : kInfo) {
    if (d.name == name) return d.kind;
  }
  return std::nullopt;
}

Var log_prob(DistKind kind, const Var& y, std::span<const Var> p) {
  const double yv = y.value();
  switch (kind) {
    case DistKind::Normal: {
      require_finite(kind, "location", p[0].value());
      require_positive(kind, "scale", p[1].value());
      const Var z = (y - p[0]) / p[1];
      return -kHalfLog2Pi - ad::log(p[1]) - 0.5 * ad::square(z);
    }
    case DistKind::Lognormal: {
      require_finite(kind, "location", p[0].value());
      require_positive(kind, "scale", p[1].value());
      if (!(yv > 0.0)) return std::isnan(yv) ? Var(yv) : Var(kNegInf);
      const Var logy = ad::log(y);
      const Var z = (logy - p[0]) / p[1];
      return -kHalfLog2Pi - ad::log(p[1]) - logy - 0.5 * ad::square(z);
    }
    case DistKind::StudentT: {
      require_positive(kind, "degrees of freedom", p[0].value());
      require_finite(kind, "location", p[1].value());
      require_positive(kind, "scale", p[2].value());
      const Var& nu = p[0];
      const Var z = (y - p[1]) / p[2];
      return ad::lgamma(0.5 * (nu + 1.0)) - ad::lgamma(0.5 * nu) -
             0.5 * ad::log(nu * std::numbers::pi) - ad::log(p[2]) -
             0.5 * (nu + 1.0) * ad::log1p(ad::square(z) / nu);
    }
    case DistKind::Cauchy: {
      require_finite(kind, "location", p[0].value());
      require_positive(kind, "scale", p[1].value());
      const Var z = (y - p[0]) / p[1];
      return -kLogPi - ad::log(p[1]) - ad::log1p(ad::square(z));
    }
    case DistKind::Uniform: {
      require_finite(kind, "lower", p[0].value());
      require_finite(kind, "upper", p[1].value());
      if (!(p[1].value() > p[0].value())) invalid(kind, "upper - lower", p[1].value() - p[0].value());
      if (std::isnan(yv)) return Var(yv);
      if (yv < p[0].value() || yv > p[1].value()) return Var(kNegInf);
      return -ad::log(p[1] - p[0]);
    }
    case DistKind::Exponential: {
      require_positive(kind, "rate", p[0].value());
      if (std::isnan(yv)) return Var(yv);
      if (yv < 0.0) return Var(kNegInf);
      return ad::log(p[0]) - p[0] * y;
    }
    case DistKind::Gamma: {
      require_positive(kind, "shape", p[0].value());
      require_positive(kind, "rate", p[1].value());
      if (std::isnan(yv)) return Var(yv);
      if (!(yv > 0.0)) return Var(kNegInf);
      return p[0] * ad::log(p[1]) - ad::lgamma(p[0]) + (p[0] - 1.0) * ad::log(y) -
             p[1] * y;
    }
    case DistKind::Beta: {
      require_positive(kind, "alpha", p[0].value());
      require_positive(kind, "beta", p[1].value());
      if (std::isnan(yv)) return Var(yv);
      if (!(yv > 0.0 && yv < 1.0)) return Var(kNegInf);
      return ad::lgamma(p[0] + p[1]) - ad::lgamma(p[0]) - ad::lgamma(p[1]) +
             (p[0] - 1.0) * ad::log(y) + (p[1] - 1.0) * ad::log1p(-y);
    }
    default:
      throw EvalError(std::string(info(kind).name) +
                      " is a discrete distribution and needs an integer outcome");
  }
}

Var log_prob(DistKind kind, std::int64_t n, std::span<const Var> p) {
  switch (kind) {
    case DistKind::Bernoulli: {
      require_probability(kind, p[0].value());
      if (n == 1) return ad::log(p[0]);
      if (n == 0) return ad::log1p(-p[0]);
      return Var(kNegInf);
    }
    case DistKind::BernoulliLogit: {
      require_finite(kind, "logit", p[0].value());
      if (n == 1) return ad::log_inv_logit(p[0]);
      if (n == 0) return ad::log_inv_logit(-p[0]);
      return Var(kNegInf);
    }
    case DistKind::Binomial: {
      const std::int64_t trials = require_integer(kind, "trials", p[0].value());
      require_probability(kind, p[1].value());
      if (n < 0 || n > trials) return Var(kNegInf);
      Var lp = lchoose(trials, n);
      if (n > 0) lp = lp + static_cast<double>(n) * ad::log(p[1]);
      if (trials - n > 0) lp = lp + static_cast<double>(trials - n) * ad::log1p(-p[1]);
      return lp;
    }
    case DistKind::Poisson: {
      if (!(p[0].value() >= 0.0) || std::isinf(p[0].value())) {
        invalid(kind, "rate", p[0].value());
      }
      if (n < 0) return Var(kNegInf);
      Var lp = -p[0] - std::lgamma(n + 1.0);
      if (n > 0) lp = lp + static_cast<double>(n) * ad::log(p[0]);
      return lp;
    }
    case DistKind::Categorical:
      throw EvalError("categorical: use categorical_log_prob");
    default:
      return log_prob(kind, Var(static_cast<double>(n)), p);
  }
}

Var categorical_log_prob(std::int64_t n, std::span<const Var> theta) {
  double total = 0.0;
  for (const Var& t : theta) {
    if (!(t.value() >= 0.0)) invalid(DistKind::Categorical, "probability", t.value());
    total += t.value();
  }
  if (std::fabs(total - 1.0) > 1e-8) invalid(DistKind::Categorical, "sum of probabilities", total);
  if (n < 1 || n > static_cast<std::int64_t>(theta.size())) return Var(kNegInf);
  return ad::log(theta[n - 1]);
}

double log_prob(DistKind kind, double y, std::span<const double> params) {
  const std::vector<Var> p = ad::constants(params);
  if (kind == DistKind::Categorical) {
    return categorical_log_prob(static_cast<std::int64_t>(y), p).value();
  }
  if (info(kind).discrete) {
    if (y != std::floor(y)) return kNegInf;
    return log_prob(kind, static_cast<std::int64_t>(y), p).value();
  }
  return log_prob(kind, Var(y), p).value();
}

double sample(DistKind kind, std::span<const double> p, Rng& rng) {
  switch (kind) {
    case DistKind::Normal:
      require_finite(kind, "location", p[0]);
      require_positive(kind, "scale", p[1]);
      return p[0] + p[1] * rng.normal();
    case DistKind::Lognormal:
      require_finite(kind, "location", p[0]);
      require_positive(kind, "scale", p[1]);
      return std::exp(p[0] + p[1] * rng.normal());
    case DistKind::StudentT: {
      require_positive(kind, "degrees of freedom", p[0]);
      require_finite(kind, "location", p[1]);
      require_positive(kind, "scale", p[2]);
      const double z = rng.normal();
      const double chi2 = 2.0 * rng.gamma(0.5 * p[0]);
      return p[1] + p[2] * z / std::sqrt(chi2 / p[0]);
    }
    case DistKind::Cauchy:
      require_finite(kind, "location", p[0]);
      require_positive(kind, "scale", p[1]);
      return p[0] + p[1] * std::tan(std::numbers::pi * (rng.uniform() - 0.5));
    case DistKind::Uniform:
      require_finite(kind, "lower", p[0]);
      require_finite(kind, "upper", p[1]);
      if (!(p[1] > p[0])) invalid(kind, "upper - lower", p[1] - p[0]);
      return p[0] + (p[1] - p[0]) * rng.uniform();
    case DistKind::Exponential:
      require_positive(kind, "rate", p[0]);
      return -std::log(rng.uniform()) / p[0];
    case DistKind::Gamma:
      require_positive(kind, "shape", p[0]);
      require_positive(kind, "rate", p[1]);
      return rng.gamma(p[0]) / p[1];
    case DistKind::Beta: {
      require_positive(kind, "alpha", p[0]);
      require_positive(kind, "beta", p[1]);
      const double x = rng.gamma(p[0]);
      const double y = rng.gamma(p[1]);
      return x / (x + y);
    }
    case DistKind::Bernoulli:
      require_probability(kind, p[0]);
      return rng.uniform() < p[0] ? 1.0 : 0.0;
    case DistKind::BernoulliLogit:
      require_finite(kind, "logit", p[0]);
      return rng.uniform() < ad::inv_logit(p[0]) ? 1.0 : 0.0;
    case DistKind::Binomial: {
      const std::int64_t trials = require_integer(kind, "trials", p[0]);
      require_probability(kind, p[1]);
      const double u = rng.uniform();
      double cdf = 0.0;
      for (std::int64_t k = 0; k < trials; ++k) {
        double lp = lchoose(trials, k);
        if (k > 0) lp += k * std::log(p[1]);
        if (trials - k > 0) lp += (trials - k) * std::log1p(-p[1]);
        cdf += std::exp(lp);
        if (u <= cdf) return static_cast<double>(k);
      }
      return static_cast<double>(trials);
    }
    case DistKind::Poisson: {
      if (!(p[0] >= 0.0) || std::isinf(p[0])) invalid(kind, "rate", p[0]);
      if (p[0] == 0.0) return 0.0;
      const double u = rng.uniform();
      const double log_rate = std::log(p[0]);
      double cdf = 0.0;
      const std::int64_t limit = static_cast<std::int64_t>(p[0] + 40.0 * std::sqrt(p[0]) + 40.0);
      for (std::int64_t k = 0; k < limit; ++k) {
        cdf += std::exp(k * log_rate - p[0] - std::lgamma(k + 1.0));
        if (u <= cdf) return static_cast<double>(k);
      }
      return static_cast<double>(limit);
    }
    case DistKind::Categorical:
      return static_cast<double>(sample_categorical(p, rng));
  }
  return 0.0;
}

std::int64_t sample_categorical(std::span<const double> theta, Rng& rng) {
  double total = 0.0;
  for (double t : theta) {
    if (!(t >= 0.0)) invalid(DistKind::Categorical, "probability", t);
    total += t;
  }
  if (std::fabs(total - 1.0) > 1e-8) invalid(DistKind::Categorical, "sum of probabilities", total);
  const double u = rng.uniform();
  double cdf = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    cdf += theta[k];
    if (u <= cdf) return static_cast<std::int64_t>(k) + 1;
  }
  // Rounding left u above the final cumulative sum; take the last category
  // with positive mass.
  for (std::size_t k = theta.size(); k > 0; --k) {
    if (theta[k - 1] > 0.0) return static_cast<std::int64_t>(k);
  }
  return static_cast<std::int64_t>(theta.size());
}

ConstraintSpec support(DistKind kind, std::span<const double> p) {
  switch (kind) {
    case DistKind::Normal:
    case DistKind::StudentT:
    case DistKind::Cauchy:
      return ConstraintSpec::none();
    case DistKind::Lognormal:
    case DistKind::Exponential:
    case DistKind::Gamma:
    case DistKind::Poisson:
      return ConstraintSpec::lower_bound(0.0);
    case DistKind::Uniform:
      return ConstraintSpec::interval(p[0], p[1]);
    case DistKind::Beta:
    case DistKind::Bernoulli:
    case DistKind::BernoulliLogit:
      return ConstraintSpec::interval(0.0, 1.0);
    case DistKind::Binomial:
      return ConstraintSpec::interval(0.0, p[0]);
    case DistKind::Categorical:
      return ConstraintSpec::interval(1.0, static_cast<double>(p.size()));
  }
  return ConstraintSpec::none();
}

}  // namespace stanvi
