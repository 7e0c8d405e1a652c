// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/autodiff.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include <boost/math/special_functions/digamma.hpp>

#include "stanvi/error.hpp"

namespace stanvi::ad {

std::vector<double> Tape::reverse(int output) const {
  std::vector<double> adjoint(size(), 0.0);
  adjoint[output] = 1.0;
  for (int node = output; node >= 0; --node) {
    const double a = adjoint[node];
    if (a == 0.0) continue;
    for (int e = begin_[node]; e < begin_[node + 1]; ++e) {
      adjoint[inputs_[e]] += partials_[e] * a;
    }
  }
  return adjoint;
}

Var Var::leaf(double value) {
  if (detail::active_tape == nullptr) {
    throw Error("ad::Var::leaf called without an active TapeScope");
  }
  return Var(value, detail::active_tape->push_leaf());
}

Var nary(double value, std::span<const Var> inputs,
         std::span<const double> partials) {
  Tape* tape = detail::active_tape;
  bool any = false;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].index_ >= 0) {
      tape->push_edge(inputs[i].index_, partials[i]);
      any = true;
    }
  }
  if (!any) return Var(value);
  return Var(value, tape->push_leaf());
}

Var pow(const Var& base, const Var& exponent) {
  const double b = base.value();
  const double e = exponent.value();
  const double p = std::pow(b, e);
  const double db = e == 0.0 ? 0.0 : e * std::pow(b, e - 1.0);
  const double de = b > 0.0 ? p * std::log(b) : 0.0;
  return Var::binary(p, base, db, exponent, de);
}

Var pow(const Var& base, double exponent) {
  const double b = base.value();
  const double db = exponent == 0.0 ? 0.0 : exponent * std::pow(b, exponent - 1.0);
  return Var::unary(std::pow(b, exponent), base, db);
}

double inv_logit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log1p_exp(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

Var inv_logit(const Var& a) {
  const double s = inv_logit(a.value());
  return Var::unary(s, a, s * (1.0 - s));
}

Var logit(const Var& a) {
  const double p = a.value();
  return Var::unary(std::log(p / (1.0 - p)), a, 1.0 / (p * (1.0 - p)));
}

Var log1p_exp(const Var& a) {
  return Var::unary(log1p_exp(a.value()), a, inv_logit(a.value()));
}

Var log_inv_logit(const Var& a) {
  return Var::unary(-log1p_exp(-a.value()), a, inv_logit(-a.value()));
}

Var lgamma(const Var& a) {
  const double x = a.value();
  const double d = a.is_constant() ? 0.0 : boost::math::digamma(x);
  return Var::unary(std::lgamma(x), a, d);
}

Var elu(const Var& a) {
  const double x = a.value();
  if (x > 0) return a;
  return Var::unary(std::expm1(x), a, std::exp(x));
}

Var log_tanh_derivative(const Var& a) {
  // 1 - tanh(x)^2 = 4 / (e^x + e^-x)^2, so the log is
  // 2 (log 2 - |x| - log1p(exp(-2|x|))).
  const double x = a.value();
  const double ax = std::fabs(x);
  const double value = 2.0 * (std::log(2.0) - ax - std::log1p(std::exp(-2.0 * ax)));
  return Var::unary(value, a, -2.0 * std::tanh(x));
}

Var sum(std::span<const Var> xs) {
  double total = 0.0;
  for (const Var& x : xs) total += x.value();
  std::vector<double> ones(xs.size(), 1.0);
  return nary(total, xs, ones);
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  double total = 0.0;
  std::vector<Var> inputs;
  std::vector<double> partials;
  inputs.reserve(2 * a.size());
  partials.reserve(2 * a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    total += a[i].value() * b[i].value();
    inputs.push_back(a[i]);
    partials.push_back(b[i].value());
    inputs.push_back(b[i]);
    partials.push_back(a[i].value());
  }
  return nary(total, inputs, partials);
}

Var log_sum_exp(std::span<const Var> xs) {
  if (xs.empty()) return Var(-std::numeric_limits<double>::infinity());
  double m = -std::numeric_limits<double>::infinity();
  for (const Var& x : xs) m = std::max(m, x.value());
  if (!std::isfinite(m)) return Var(m);
  double total = 0.0;
  std::vector<double> partials(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    partials[i] = std::exp(xs[i].value() - m);
    total += partials[i];
  }
  for (double& p : partials) p /= total;
  return nary(m + std::log(total), xs, partials);
}

Var log_sum_exp(const Var& a, const Var& b) {
  const Var xs[] = {a, b};
  return log_sum_exp(std::span<const Var>(xs, 2));
}

std::vector<Var> constants(std::span<const double> xs) {
  return std::vector<Var>(xs.begin(), xs.end());
}

std::vector<double> values(std::span<const Var> xs) {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(),
                 [](const Var& v) { return v.value(); });
  return out;
}

Gradient grad(const ScalarFunction& f, std::span<const double> x) {
  TapeScope scope;
  std::vector<Var> inputs;
  inputs.reserve(x.size());
  for (double xi : x) inputs.push_back(Var::leaf(xi));
  const Var out = f(inputs);

  Gradient result;
  result.value = out.value();
  result.gradient.assign(x.size(), 0.0);
  if (std::isnan(result.value)) throw NaNDetected("gradient: function value is NaN");
  if (!out.is_constant()) {
    const std::vector<double> adjoint = scope.tape().reverse(out.index());
    for (std::size_t i = 0; i < x.size(); ++i) {
      result.gradient[i] = adjoint[inputs[i].index()];
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(result.gradient[i])) {
      throw NaNDetected("gradient: component " + std::to_string(i) + " is NaN");
    }
  }
  return result;
}

double evaluate(const ScalarFunction& f, std::span<const double> x) {
  const std::vector<Var> args = constants(x);
  return f(args).value();
}

Eigen::MatrixXd hessian_unsymmetrized(const ScalarFunction& f,
                                      std::span<const double> x,
                                      const HessianOptions& options) {
  const std::size_t n = x.size();
  if (n > options.max_dim) {
    throw Unsupported("hessian: dimension " + std::to_string(n) +
                      " exceeds the configured cap " +
                      std::to_string(options.max_dim));
  }
  Eigen::MatrixXd h(n, n);
  std::vector<double> point(x.begin(), x.end());
  for (std::size_t i = 0; i < n; ++i) {
    const double step = std::max(1e-4, 1e-4 * std::fabs(x[i]));
    point[i] = x[i] + step;
    const Gradient plus = grad(f, point);
    point[i] = x[i] - step;
    const Gradient minus = grad(f, point);
    point[i] = x[i];
    for (std::size_t j = 0; j < n; ++j) {
      h(j, i) = (plus.gradient[j] - minus.gradient[j]) / (2.0 * step);
    }
  }
  if (h.hasNaN()) throw NaNDetected("hessian: NaN entry");
  return h;
}

Eigen::MatrixXd hessian(const ScalarFunction& f, std::span<const double> x,
                        const HessianOptions& options) {
  const Eigen::MatrixXd h = hessian_unsymmetrized(f, x, options);
  return 0.5 * (h + h.transpose());
}

double check_grad(const ScalarFunction& f, std::span<const double> x, double h) {
  const Gradient ad = grad(f, x);
  std::vector<double> point(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    point[i] = x[i] + h;
    const double plus = evaluate(f, point);
    point[i] = x[i] - h;
    const double minus = evaluate(f, point);
    point[i] = x[i];
    const double fd = (plus - minus) / (2.0 * h);
    worst = std::max(worst, std::fabs(ad.gradient[i] - fd) / std::max(1.0, std::fabs(fd)));
  }
  return worst;
}

}  // namespace stanvi::ad
