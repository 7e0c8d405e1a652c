// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <span>
#include <string>
#include <vector>

#include "stanvi/autodiff.hpp"

namespace stanvi {

enum class TransformKind { Identity, Lower, Upper, Interval, Simplex, Ordered };

const char* to_string(TransformKind kind);

/// Evaluated constraint of a declaration or the support of a distribution.
struct ConstraintSpec {
  TransformKind kind = TransformKind::Identity;
  double lower = 0.0;
  double upper = 0.0;

  static ConstraintSpec none() { return {}; }
  static ConstraintSpec lower_bound(double b) { return {TransformKind::Lower, b, 0.0}; }
  static ConstraintSpec upper_bound(double b) { return {TransformKind::Upper, 0.0, b}; }
  static ConstraintSpec interval(double a, double b) {
    return {TransformKind::Interval, a, b};
  }
  static ConstraintSpec simplex() { return {TransformKind::Simplex, 0.0, 0.0}; }
  static ConstraintSpec ordered() { return {TransformKind::Ordered, 0.0, 0.0}; }

  /// Membership test used to validate data and transformed parameters.
  bool contains(std::span<const double> x) const;

  bool operator==(const ConstraintSpec&) const = default;
};

std::string to_string(const ConstraintSpec& spec);

/// Bijection from unconstrained R^n onto a constraint's support, applied to
/// `num_blocks` consecutive blocks of `block_size` constrained values.
/// Element-wise kinds use block_size 1; simplex and ordered use the vector
/// length.
///
///   lower(b):       x = b + exp(u)                 ladj = u
///   upper(b):       x = b - exp(u)                 ladj = u
///   interval(a,b):  x = a + (b - a) inv_logit(u)   ladj = log(b - a) + log s(u) + log s(-u)
///   ordered:        x1 = u1, xk = x(k-1) + exp(uk) ladj = sum_{k>=2} uk
///   simplex (K):    stick breaking with centring offset log(1 / (K - k)),
///                   K - 1 free coordinates
class Transform {
 public:
  Transform() = default;
  Transform(ConstraintSpec spec, int block_size, int num_blocks);

  const ConstraintSpec& spec() const { return spec_; }
  int block_size() const { return block_size_; }
  int num_blocks() const { return num_blocks_; }
  int constrained_size() const { return block_size_ * num_blocks_; }
  int unconstrained_size() const;

  /// Writes the constrained values into x and returns log |det J|.
  ad::Var forward(std::span<const ad::Var> u, std::span<ad::Var> x) const;

  struct Forward {
    std::vector<double> value;
    double log_abs_det_jacobian;
  };
  Forward forward(std::span<const double> u) const;

  /// Throws OutOfSupport when x is not strictly inside the support.
  std::vector<double> inverse(std::span<const double> x) const;

 private:
  ConstraintSpec spec_;
  int block_size_ = 1;
  int num_blocks_ = 0;
};

}  // namespace stanvi
