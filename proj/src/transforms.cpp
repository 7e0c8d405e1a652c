// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/transforms.hpp"

#include <cmath>
#include <sstream>

#include "stanvi/error.hpp"

namespace stanvi {

namespace {

constexpr double kSimplexTolerance = 1e-8;

std::string describe(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

const char* to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::Identity: return "identity";
    case TransformKind::Lower: return "lower";
    case TransformKind::Upper: return "upper";
    case TransformKind::Interval: return "interval";
    case TransformKind::Simplex: return "simplex";
    case TransformKind::Ordered: return "ordered";
  }
  return "?";
}

std::string to_string(const ConstraintSpec& spec) {
  switch (spec.kind) {
    case TransformKind::Lower: return "lower(" + describe(spec.lower) + ")";
    case TransformKind::Upper: return "upper(" + describe(spec.upper) + ")";
    case TransformKind::Interval:
      return "interval(" + describe(spec.lower) + ", " + describe(spec.upper) + ")";
    default: return to_string(spec.kind);
  }
}

bool ConstraintSpec::contains(std::span<const double> x) const {
  switch (kind) {
    case TransformKind::Identity: return true;
    case TransformKind::Lower:
      for (double v : x) if (!(v >= lower)) return false;
      return true;
    case TransformKind::Upper:
      for (double v : x) if (!(v <= upper)) return false;
      return true;
    case TransformKind::Interval:
      for (double v : x) if (!(v >= lower && v <= upper)) return false;
      return true;
    case TransformKind::Simplex: {
      double total = 0.0;
      for (double v : x) {
        if (!(v >= 0.0)) return false;
        total += v;
      }
      return std::fabs(total - 1.0) <= kSimplexTolerance;
    }
    case TransformKind::Ordered:
      for (std::size_t i = 1; i < x.size(); ++i) if (!(x[i] > x[i - 1])) return false;
      return true;
  }
  return false;
}

Transform::Transform(ConstraintSpec spec, int block_size, int num_blocks)
    : spec_(spec), block_size_(block_size), num_blocks_(num_blocks) {
  if (spec_.kind != TransformKind::Simplex && spec_.kind != TransformKind::Ordered &&
      block_size_ != 1) {
    block_size_ = 1;
    num_blocks_ = block_size * num_blocks;
  }
}

int Transform::unconstrained_size() const {
  if (spec_.kind == TransformKind::Simplex) {
    return num_blocks_ * (block_size_ > 0 ? block_size_ - 1 : 0);
  }
  return constrained_size();
}

ad::Var Transform::forward(std::span<const ad::Var> u, std::span<ad::Var> x) const {
  using ad::Var;
  Var ladj = 0.0;
  switch (spec_.kind) {
    case TransformKind::Identity:
      for (std::size_t i = 0; i < u.size(); ++i) x[i] = u[i];
      return ladj;
    case TransformKind::Lower: {
      std::vector<Var> terms(u.begin(), u.end());
      for (std::size_t i = 0; i < u.size(); ++i) x[i] = spec_.lower + ad::exp(u[i]);
      return ad::sum(terms);
    }
    case TransformKind::Upper: {
      std::vector<Var> terms(u.begin(), u.end());
      for (std::size_t i = 0; i < u.size(); ++i) x[i] = spec_.upper - ad::exp(u[i]);
      return ad::sum(terms);
    }
    case TransformKind::Interval: {
      const double width = spec_.upper - spec_.lower;
      std::vector<Var> terms;
      terms.reserve(2 * u.size());
      for (std::size_t i = 0; i < u.size(); ++i) {
        x[i] = spec_.lower + width * ad::inv_logit(u[i]);
        terms.push_back(ad::log_inv_logit(u[i]));
        terms.push_back(ad::log_inv_logit(-u[i]));
      }
      return static_cast<double>(u.size()) * std::log(width) + ad::sum(terms);
    }
    case TransformKind::Ordered: {
      std::vector<Var> terms;
      for (int b = 0; b < num_blocks_; ++b) {
        const std::size_t base = static_cast<std::size_t>(b) * block_size_;
        if (block_size_ == 0) continue;
        x[base] = u[base];
        for (int k = 1; k < block_size_; ++k) {
          x[base + k] = x[base + k - 1] + ad::exp(u[base + k]);
          terms.push_back(u[base + k]);
        }
      }
      return ad::sum(terms);
    }
    case TransformKind::Simplex: {
      const int free = block_size_ - 1;
      std::vector<Var> terms;
      for (int b = 0; b < num_blocks_; ++b) {
        const std::size_t ubase = static_cast<std::size_t>(b) * free;
        const std::size_t xbase = static_cast<std::size_t>(b) * block_size_;
        Var stick = 1.0;
        for (int k = 0; k < free; ++k) {
          const Var adj = u[ubase + k] + std::log(1.0 / (block_size_ - 1 - k));
          const Var z = ad::inv_logit(adj);
          x[xbase + k] = stick * z;
          terms.push_back(ad::log(stick));
          terms.push_back(ad::log_inv_logit(adj));
          terms.push_back(ad::log_inv_logit(-adj));
          stick = stick - x[xbase + k];
        }
        if (block_size_ > 0) x[xbase + free] = stick;
      }
      return ad::sum(terms);
    }
  }
  return ladj;
}

Transform::Forward Transform::forward(std::span<const double> u) const {
  const std::vector<ad::Var> args = ad::constants(u);
  std::vector<ad::Var> x(constrained_size());
  const ad::Var ladj = forward(args, x);
  return {ad::values(x), ladj.value()};
}

std::vector<double> Transform::inverse(std::span<const double> x) const {
  std::vector<double> u(unconstrained_size());
  auto out_of_support = [&](std::size_t i) {
    throw OutOfSupport("value " + describe(x[i]) + " is outside the support of " +
                       to_string(spec_));
  };
  switch (spec_.kind) {
    case TransformKind::Identity:
      for (std::size_t i = 0; i < x.size(); ++i) u[i] = x[i];
      break;
    case TransformKind::Lower:
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > spec_.lower)) out_of_support(i);
        u[i] = std::log(x[i] - spec_.lower);
      }
      break;
    case TransformKind::Upper:
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] < spec_.upper)) out_of_support(i);
        u[i] = std::log(spec_.upper - x[i]);
      }
      break;
    case TransformKind::Interval:
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > spec_.lower && x[i] < spec_.upper)) out_of_support(i);
        const double p = (x[i] - spec_.lower) / (spec_.upper - spec_.lower);
        u[i] = std::log(p) - std::log1p(-p);
      }
      break;
    case TransformKind::Ordered:
      for (int b = 0; b < num_blocks_; ++b) {
        const std::size_t base = static_cast<std::size_t>(b) * block_size_;
        if (block_size_ == 0) continue;
        u[base] = x[base];
        for (int k = 1; k < block_size_; ++k) {
          if (!(x[base + k] > x[base + k - 1])) out_of_support(base + k);
          u[base + k] = std::log(x[base + k] - x[base + k - 1]);
        }
      }
      break;
    case TransformKind::Simplex: {
      const int free = block_size_ - 1;
      for (int b = 0; b < num_blocks_; ++b) {
        const std::size_t xbase = static_cast<std::size_t>(b) * block_size_;
        const std::span<const double> block = x.subspan(xbase, block_size_);
        double total = 0.0;
        for (std::size_t k = 0; k < block.size(); ++k) {
          if (!(block[k] > 0.0)) out_of_support(xbase + k);
          total += block[k];
        }
        if (std::fabs(total - 1.0) > kSimplexTolerance) {
          throw OutOfSupport("simplex components sum to " + describe(total));
        }
        double stick = 1.0;
        for (int k = 0; k < free; ++k) {
          const double z = block[k] / stick;
          u[static_cast<std::size_t>(b) * free + k] =
              std::log(z) - std::log1p(-z) - std::log(1.0 / (block_size_ - 1 - k));
          stick -= block[k];
        }
      }
      break;
    }
  }
  return u;
}

}  // namespace stanvi
