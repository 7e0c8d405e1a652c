// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace stanvi::ad {

/// Reverse-mode tape. Node i stores the indices of its inputs and the local
/// partial derivative with respect to each; inputs always precede the node,
/// so a single backwards sweep fills every adjoint.
class Tape {
 public:
  Tape() { begin_.push_back(0); }

  int push_leaf() {
    begin_.push_back(static_cast<int>(inputs_.size()));
    return static_cast<int>(begin_.size()) - 2;
  }

  int push1(int a, double da) {
    inputs_.push_back(a);
    partials_.push_back(da);
    return push_leaf();
  }

  int push2(int a, double da, int b, double db) {
    inputs_.push_back(a);
    partials_.push_back(da);
    inputs_.push_back(b);
    partials_.push_back(db);
    return push_leaf();
  }

  /// Appends one edge of an n-ary node; finish with push_leaf().
  void push_edge(int input, double partial) {
    inputs_.push_back(input);
    partials_.push_back(partial);
  }

  std::size_t size() const { return begin_.size() - 1; }

  /// Adjoints of every node with respect to node `output`.
  std::vector<double> reverse(int output) const;

 private:
  std::vector<int> begin_;
  std::vector<int> inputs_;
  std::vector<double> partials_;
};

namespace detail {
inline thread_local Tape* active_tape = nullptr;
}

/// Makes a fresh tape current on this thread for the scope's lifetime.
class TapeScope {
 public:
  TapeScope() : previous_(detail::active_tape) { detail::active_tape = &tape_; }
  ~TapeScope() { detail::active_tape = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

  Tape& tape() { return tape_; }

 private:
  Tape tape_;
  Tape* previous_;
};

/// Scalar that records operations on the active tape. A Var built from a
/// plain double is a constant: it has no tape node and operations on
/// constants only produce constants, so numeric code written against Var
/// doubles as the plain floating-point path.
class Var {
 public:
  Var() = default;
  Var(double value) : value_(value) {}  // NOLINT(google-explicit-constructor)

  /// Independent variable on the active tape.
  static Var leaf(double value);

  double value() const { return value_; }
  int index() const { return index_; }
  bool is_constant() const { return index_ < 0; }

  static Var unary(double value, const Var& a, double da) {
    if (a.index_ < 0) return Var(value);
    return Var(value, detail::active_tape->push1(a.index_, da));
  }

  static Var binary(double value, const Var& a, double da, const Var& b,
                    double db) {
    if (a.index_ < 0) return unary(value, b, db);
    if (b.index_ < 0) return Var(value, detail::active_tape->push1(a.index_, da));
    return Var(value, detail::active_tape->push2(a.index_, da, b.index_, db));
  }

  Var& operator+=(const Var& o);
  Var& operator-=(const Var& o);
  Var& operator*=(const Var& o);
  Var& operator/=(const Var& o);

 private:
  Var(double value, int index) : value_(value), index_(index) {}
  friend Var nary(double value, std::span<const Var> inputs,
                  std::span<const double> partials);

  double value_ = 0.0;
  int index_ = -1;
};

/// Node with arbitrary fan-in; partials[i] is d(value)/d(inputs[i]).
Var nary(double value, std::span<const Var> inputs,
         std::span<const double> partials);

inline double value_of(const Var& v) { return v.value(); }
inline double value_of(double v) { return v; }

inline Var operator+(const Var& a, const Var& b) {
  return Var::binary(a.value() + b.value(), a, 1.0, b, 1.0);
}
inline Var operator-(const Var& a, const Var& b) {
  return Var::binary(a.value() - b.value(), a, 1.0, b, -1.0);
}
inline Var operator*(const Var& a, const Var& b) {
  return Var::binary(a.value() * b.value(), a, b.value(), b, a.value());
}
inline Var operator/(const Var& a, const Var& b) {
  const double q = a.value() / b.value();
  return Var::binary(q, a, 1.0 / b.value(), b, -q / b.value());
}
inline Var operator-(const Var& a) { return Var::unary(-a.value(), a, -1.0); }

inline Var operator+(const Var& a, double b) { return Var::unary(a.value() + b, a, 1.0); }
inline Var operator+(double a, const Var& b) { return Var::unary(a + b.value(), b, 1.0); }
inline Var operator-(const Var& a, double b) { return Var::unary(a.value() - b, a, 1.0); }
inline Var operator-(double a, const Var& b) { return Var::unary(a - b.value(), b, -1.0); }
inline Var operator*(const Var& a, double b) { return Var::unary(a.value() * b, a, b); }
inline Var operator*(double a, const Var& b) { return Var::unary(a * b.value(), b, a); }
inline Var operator/(const Var& a, double b) { return Var::unary(a.value() / b, a, 1.0 / b); }
inline Var operator/(double a, const Var& b) {
  const double q = a / b.value();
  return Var::unary(q, b, -q / b.value());
}

inline Var& Var::operator+=(const Var& o) { return *this = *this + o; }
inline Var& Var::operator-=(const Var& o) { return *this = *this - o; }
inline Var& Var::operator*=(const Var& o) { return *this = *this * o; }
inline Var& Var::operator/=(const Var& o) { return *this = *this / o; }

// Comparisons look at values only; branches are not differentiated.
inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }
inline bool operator==(const Var& a, const Var& b) { return a.value() == b.value(); }
inline bool operator!=(const Var& a, const Var& b) { return a.value() != b.value(); }

inline Var exp(const Var& a) {
  const double e = std::exp(a.value());
  return Var::unary(e, a, e);
}
inline Var log(const Var& a) { return Var::unary(std::log(a.value()), a, 1.0 / a.value()); }
inline Var log1p(const Var& a) {
  return Var::unary(std::log1p(a.value()), a, 1.0 / (1.0 + a.value()));
}
inline Var expm1(const Var& a) {
  return Var::unary(std::expm1(a.value()), a, std::exp(a.value()));
}
inline Var sqrt(const Var& a) {
  const double s = std::sqrt(a.value());
  return Var::unary(s, a, 0.5 / s);
}
inline Var square(const Var& a) {
  return Var::unary(a.value() * a.value(), a, 2.0 * a.value());
}
inline Var abs(const Var& a) {
  return Var::unary(std::fabs(a.value()), a, a.value() < 0 ? -1.0 : 1.0);
}
inline Var tanh(const Var& a) {
  const double t = std::tanh(a.value());
  return Var::unary(t, a, 1.0 - t * t);
}

Var pow(const Var& base, const Var& exponent);
Var pow(const Var& base, double exponent);

/// Logistic sigmoid 1 / (1 + exp(-x)).
Var inv_logit(const Var& a);
Var logit(const Var& a);
/// log(1 + exp(x)), accurate at both tails.
Var log1p_exp(const Var& a);
/// log(inv_logit(x)) = -log1p_exp(-x).
Var log_inv_logit(const Var& a);
Var lgamma(const Var& a);
/// x for x > 0, exp(x) - 1 otherwise.
Var elu(const Var& a);
/// log(1 - tanh(x)^2) without cancellation.
Var log_tanh_derivative(const Var& a);

Var sum(std::span<const Var> xs);
Var dot(std::span<const Var> a, std::span<const Var> b);
Var log_sum_exp(std::span<const Var> xs);
Var log_sum_exp(const Var& a, const Var& b);

double inv_logit(double x);
double log1p_exp(double x);

std::vector<Var> constants(std::span<const double> xs);
std::vector<double> values(std::span<const Var> xs);

/// Description of a differentiable function R^n -> R.
using ScalarFunction = std::function<Var(std::span<const Var>)>;

struct Gradient {
  double value = 0.0;
  std::vector<double> gradient;
};

/// Reverse-mode gradient of the evaluated branch of f. Throws NaNDetected
/// when the value or any component of the gradient is NaN.
Gradient grad(const ScalarFunction& f, std::span<const double> x);

struct HessianOptions {
  std::size_t max_dim = 200;
};

/// Central differences of the reverse-mode gradient with step
/// h_i = max(1e-4, 1e-4 |x_i|), returned symmetrised as (H + H^T) / 2.
Eigen::MatrixXd hessian(const ScalarFunction& f, std::span<const double> x,
                        const HessianOptions& options = {});

/// Same differencing without the symmetrisation step.
Eigen::MatrixXd hessian_unsymmetrized(const ScalarFunction& f,
                                      std::span<const double> x,
                                      const HessianOptions& options = {});

/// max_i |ad_i - fd_i| / max(1, |fd_i|) with central differences of step h.
double check_grad(const ScalarFunction& f, std::span<const double> x, double h);

/// Plain evaluation: every argument is a constant so no tape is touched.
double evaluate(const ScalarFunction& f, std::span<const double> x);

}  // namespace stanvi::ad
