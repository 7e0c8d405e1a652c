// Apache License, Version 2.0, refer to LICENSE.txt

#include "stanvi/guides.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "stanvi/error.hpp"
#include "stanvi/model.hpp"

namespace stanvi {

using ad::Var;

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Names {
  GuideKind kind;
  std::string_view name;
  std::string_view cli;
};

constexpr Names kNames[] = {
    {GuideKind::Delta, "Delta", "delta"},
    {GuideKind::Normal, "Normal", "normal"},
    {GuideKind::DiagonalNormal, "DiagonalNormal", "diagonal-normal"},
    {GuideKind::MultivariateNormal, "MultivariateNormal", "multivariate-normal"},
    {GuideKind::LowRankMultivariateNormal, "LowRankMultivariateNormal", "low-rank"},
    {GuideKind::LaplaceApproximation, "LaplaceApproximation", "laplace"},
    {GuideKind::IAFNormal, "IAFNormal", "iaf"},
    {GuideKind::BNAFNormal, "BNAFNormal", "bnaf"},
};

double std_normal_log(std::span<const double> eps) {
  double out = 0.0;
  for (double e : eps) out -= 0.5 * e * e + kHalfLog2Pi;
  return out;
}

std::vector<Var> reversed(std::span<const Var> z) { return {z.rbegin(), z.rend()}; }

std::vector<double> reversed(std::span<const double> z) { return {z.rbegin(), z.rend()}; }

// log N(x | 0, diag(scale^2) + W W^T) through the matrix determinant lemma
// and Woodbury, with a Cholesky factor of the rank x rank capacitance.
Var low_rank_log_density(std::span<const Var> x, std::span<const Var> w,
                         std::span<const Var> log_scale, int rank) {
  const int d = static_cast<int>(x.size());
  std::vector<Var> inv_var(d), dx(d);
  Var quad = 0.0;
  Var log_det = 0.0;
  for (int i = 0; i < d; ++i) {
    inv_var[i] = ad::exp(-2.0 * log_scale[i]);
    dx[i] = x[i] * inv_var[i];
    quad += x[i] * dx[i];
    log_det += 2.0 * log_scale[i];
  }
  // capacitance C = I + W^T D^-1 W and a = W^T D^-1 x
  std::vector<Var> c(rank * rank), a(rank);
  std::vector<Var> col_j(d), col_k(d), scaled(d);
  for (int j = 0; j < rank; ++j) {
    for (int i = 0; i < d; ++i) {
      col_j[i] = w[i * rank + j];
      scaled[i] = col_j[i] * inv_var[i];
    }
    a[j] = ad::dot(col_j, dx);
    for (int k = 0; k <= j; ++k) {
      for (int i = 0; i < d; ++i) col_k[i] = w[i * rank + k];
      c[j * rank + k] = ad::dot(scaled, col_k) + (j == k ? 1.0 : 0.0);
    }
  }
  // C = K K^T
  std::vector<Var> k(rank * rank, Var(0.0));
  for (int j = 0; j < rank; ++j) {
    for (int i = j; i < rank; ++i) {
      Var s = c[i * rank + j];
      for (int m = 0; m < j; ++m) s -= k[i * rank + m] * k[j * rank + m];
      if (i == j) {
        k[j * rank + j] = ad::sqrt(s);
      } else {
        k[i * rank + j] = s / k[j * rank + j];
      }
    }
  }
  // b = K^-1 a
  std::vector<Var> b(rank);
  for (int i = 0; i < rank; ++i) {
    Var s = a[i];
    for (int m = 0; m < i; ++m) s -= k[i * rank + m] * b[m];
    b[i] = s / k[i * rank + i];
    quad -= ad::square(b[i]);
    log_det += 2.0 * ad::log(k[i * rank + i]);
  }
  return -0.5 * (quad + log_det) - d * kHalfLog2Pi;
}

// Increasing function of one coordinate; brackets and bisects for f(z) = y.
template <typename F>
double solve_increasing(const F& f, double y) {
  double lo = -1.0, hi = 1.0;
  int expansions = 0;
  while (f(lo) > y) {
    hi = lo;
    lo *= 2.0;
    if (++expansions > 60) throw NonConvergence("flow inverse: target below the flow's range");
  }
  while (f(hi) < y) {
    lo = hi;
    hi *= 2.0;
    if (++expansions > 60) throw NonConvergence("flow inverse: target above the flow's range");
  }
  for (int it = 0; it < 400 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < y) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::string_view to_string(GuideKind kind) {
  for (const Names& n : kNames) {
    if (n.kind == kind) return n.name;
  }
  return "?";
}

std::string_view cli_name(GuideKind kind) {
  for (const Names& n : kNames) {
    if (n.kind == kind) return n.cli;
  }
  return "?";
}

std::optional<GuideKind> parse_guide_kind(std::string_view name) {
  for (const Names& n : kNames) {
    if (n.name == name || n.cli == name) return n.kind;
  }
  return std::nullopt;
}

void GuideConfig::validate() const {
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) {
    throw std::invalid_argument("init_scale must be positive");
  }
  if (!(init_loc_jitter >= 0.0)) throw std::invalid_argument("init_loc_jitter must be >= 0");
  if (rank < 0) throw std::invalid_argument("rank must be positive");
  if (iaf_num_flows < 1) throw std::invalid_argument("iaf_num_flows must be positive");
  if (bnaf_num_flows < 1) throw std::invalid_argument("bnaf_num_flows must be positive");
  for (int h : iaf_hidden) {
    if (h < 1) throw std::invalid_argument("iaf_hidden entries must be positive");
  }
  if (bnaf_block_factors.empty()) {
    throw std::invalid_argument("bnaf_block_factors must be non-empty");
  }
  for (int f : bnaf_block_factors) {
    if (f < 1) throw std::invalid_argument("bnaf_block_factors entries must be positive");
  }
  if (!std::isfinite(iaf_gate_bias)) throw std::invalid_argument("iaf_gate_bias must be finite");
}

// ---- construction ------------------------------------------------------------------

Guide::Guide(GuideKind kind, int dim, GuideConfig config, std::vector<int> site_sizes)
    : kind_(kind), dim_(dim), config_(std::move(config)) {
  if (dim_ < 1) throw UnsupportedDimension("guide: the model has no parameters");
  config_.validate();
  const int d = dim_;
  switch (kind_) {
    case GuideKind::Delta:
    case GuideKind::LaplaceApproximation:
      num_params_ = d;
      break;
    case GuideKind::DiagonalNormal:
      for (int i = 0; i < d; ++i) {
        loc_index_.push_back(i);
        scale_index_.push_back(d + i);
      }
      num_params_ = 2 * d;
      break;
    case GuideKind::Normal: {
      if (site_sizes.empty()) site_sizes = {d};
      int total = 0;
      for (int s : site_sizes) total += s;
      if (total != d) throw std::invalid_argument("guide: site sizes do not add up to dim");
      int offset = 0;
      for (int s : site_sizes) {
        for (int i = 0; i < s; ++i) {
          loc_index_.push_back(offset + i);
          scale_index_.push_back(offset + s + i);
        }
        offset += 2 * s;
      }
      num_params_ = 2 * d;
      break;
    }
    case GuideKind::MultivariateNormal:
      num_params_ = d + d * (d + 1) / 2;
      break;
    case GuideKind::LowRankMultivariateNormal:
      rank_ = config_.rank > 0 ? config_.rank : std::max(1, d / 2);
      num_params_ = d + d * rank_ + d;
      break;
    case GuideKind::IAFNormal:
      build_iaf();
      break;
    case GuideKind::BNAFNormal:
      build_bnaf();
      break;
  }
}

void Guide::build_iaf() {
  const int d = dim_;
  std::vector<int> hidden = config_.iaf_hidden;
  if (hidden.empty()) hidden = {2 * d, 2 * d};
  // MADE degrees: input k has degree k + 1; hidden units cycle through
  // 1 .. d - 1; output i (both m_i and s_i) has degree i + 1 and sees hidden
  // units of strictly smaller degree.
  std::vector<int> in_degree(d);
  for (int k = 0; k < d; ++k) in_degree[k] = k + 1;
  int offset = 0;
  for (int f = 0; f < config_.iaf_num_flows; ++f) {
    std::vector<MaskedLayer> layers;
    std::vector<int> prev = in_degree;
    const auto add_layer = [&](const std::vector<int>& out_degree, bool strict) {
      MaskedLayer layer;
      layer.in = static_cast<int>(prev.size());
      layer.out = static_cast<int>(out_degree.size());
      for (int j = 0; j < layer.out; ++j) {
        std::vector<int> inputs;
        for (int k = 0; k < layer.in; ++k) {
          if (strict ? out_degree[j] > prev[k] : out_degree[j] >= prev[k]) inputs.push_back(k);
        }
        layer.weight_offset.push_back(offset);
        offset += static_cast<int>(inputs.size());
        layer.bias_offset.push_back(offset++);
        layer.inputs.push_back(std::move(inputs));
      }
      layers.push_back(std::move(layer));
      prev = out_degree;
    };
    for (int h : hidden) {
      std::vector<int> degree(h);
      for (int k = 0; k < h; ++k) degree[k] = d > 1 ? k % (d - 1) + 1 : 0;
      add_layer(degree, false);
    }
    std::vector<int> out_degree(2 * d);
    for (int i = 0; i < 2 * d; ++i) out_degree[i] = i % d + 1;
    add_layer(out_degree, true);
    iaf_.push_back(std::move(layers));
  }
  num_params_ = offset;
}

void Guide::build_bnaf() {
  const int d = dim_;
  std::vector<int> factors = {1};
  for (int f : config_.bnaf_block_factors) factors.push_back(f);
  factors.push_back(1);
  int offset = 0;
  for (int f = 0; f < config_.bnaf_num_flows; ++f) {
    std::vector<BlockLayer> layers;
    for (std::size_t l = 0; l + 1 < factors.size(); ++l) {
      BlockLayer layer;
      layer.in_factor = factors[l];
      layer.out_factor = factors[l + 1];
      for (int r = 0; r < d * layer.out_factor; ++r) {
        const int block = r / layer.out_factor;
        layer.row_offset.push_back(offset);
        offset += (block + 1) * layer.in_factor + 2;
      }
      layers.push_back(std::move(layer));
    }
    bnaf_.push_back(std::move(layers));
  }
  num_params_ = offset;
}

int Guide::noise_dim() const {
  switch (kind_) {
    case GuideKind::Delta: return 0;
    case GuideKind::LaplaceApproximation: return finalized_ ? dim_ : 0;
    case GuideKind::LowRankMultivariateNormal: return rank_ + dim_;
    default: return dim_;
  }
}

std::vector<double> Guide::init(Rng& rng) const {
  const int d = dim_;
  std::vector<double> theta(num_params_, 0.0);
  const double log_scale = std::log(config_.init_scale);
  const auto jitter_locs = [&](int count) {
    if (config_.init_loc_jitter > 0.0) {
      for (int i = 0; i < count; ++i) {
        const int at = loc_index_.empty() ? i : loc_index_[i];
        theta[at] = config_.init_loc_jitter * rng.normal();
      }
    }
  };
  switch (kind_) {
    case GuideKind::Delta:
    case GuideKind::LaplaceApproximation:
    case GuideKind::MultivariateNormal:
    case GuideKind::LowRankMultivariateNormal:
    case GuideKind::Normal:
    case GuideKind::DiagonalNormal:
      jitter_locs(d);
      break;
    default:
      break;
  }
  switch (kind_) {
    case GuideKind::Normal:
    case GuideKind::DiagonalNormal:
      for (int i : scale_index_) theta[i] = log_scale;
      break;
    case GuideKind::MultivariateNormal:
      for (int i = 0; i < d; ++i) theta[d + i * (i + 1) / 2 + i] = log_scale;
      break;
    case GuideKind::LowRankMultivariateNormal:
      for (int i = 0; i < d; ++i) theta[d + d * rank_ + i] = log_scale;
      break;
    case GuideKind::IAFNormal:
      // weights N(0, 0.01 / fan_in), biases 0
      for (const auto& flow : iaf_) {
        for (const MaskedLayer& layer : flow) {
          for (int j = 0; j < layer.out; ++j) {
            const auto& in = layer.inputs[j];
            const double sd = 0.1 / std::sqrt(std::max<std::size_t>(1, in.size()));
            for (std::size_t k = 0; k < in.size(); ++k) {
              theta[layer.weight_offset[j] + k] = sd * rng.normal();
            }
          }
        }
      }
      break;
    case GuideKind::BNAFNormal:
      // off-diagonal weights N(0, 1 / fan_in), log diagonal weights
      // -log(fan_in) / 2 + N(0, 0.01), unit row norms, zero biases
      for (const auto& flow : bnaf_) {
        for (const BlockLayer& layer : flow) {
          for (std::size_t r = 0; r < layer.row_offset.size(); ++r) {
            const int block = static_cast<int>(r) / layer.out_factor;
            const int off_diag = block * layer.in_factor;
            const int fan_in = off_diag + layer.in_factor;
            const double sd = 1.0 / std::sqrt(fan_in);
            const int at = layer.row_offset[r];
            for (int k = 0; k < off_diag; ++k) theta[at + k] = sd * rng.normal();
            for (int k = 0; k < layer.in_factor; ++k) {
              theta[at + off_diag + k] = std::log(sd) + 0.1 * rng.normal();
            }
          }
        }
      }
      break;
    default:
      break;
  }
  return theta;
}

std::vector<double> Guide::draw_noise(Rng& rng) const {
  std::vector<double> eps(noise_dim());
  for (double& e : eps) e = rng.normal();
  return eps;
}

// ---- flows --------------------------------------------------------------------------

std::vector<Var> Guide::made(std::span<const Var> theta, int flow, std::span<const Var> z) const {
  std::vector<Var> h(z.begin(), z.end());
  const auto& layers = iaf_[flow];
  std::vector<Var> gathered;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const MaskedLayer& layer = layers[l];
    std::vector<Var> next(layer.out);
    for (int j = 0; j < layer.out; ++j) {
      const auto& in = layer.inputs[j];
      gathered.resize(in.size());
      for (std::size_t k = 0; k < in.size(); ++k) gathered[k] = h[in[k]];
      Var pre = theta[layer.bias_offset[j]];
      if (!in.empty()) pre += ad::dot(theta.subspan(layer.weight_offset[j], in.size()), gathered);
      next[j] = l + 1 < layers.size() ? ad::elu(pre) : pre;
    }
    h = std::move(next);
  }
  return h;
}

std::vector<Var> Guide::iaf_layer(std::span<const Var> theta, int flow, std::span<const Var> z,
                                  Var& log_det) const {
  const int d = dim_;
  const std::vector<Var> out = made(theta, flow, z);
  std::vector<Var> next(d);
  for (int i = 0; i < d; ++i) {
    const Var s = out[d + i] + config_.iaf_gate_bias;
    const Var gate = ad::inv_logit(s);
    next[i] = gate * z[i] + (1.0 - gate) * out[i];
    log_det += ad::log_inv_logit(s);
  }
  return next;
}

std::vector<Var> Guide::bnaf_flow(std::span<const Var> theta, int flow, std::span<const Var> z,
                                  std::vector<Var>* log_diag) const {
  const int d = dim_;
  const auto& layers = bnaf_[flow];
  std::vector<Var> x(z.begin(), z.end());
  // log d(x rows of block i) / dz_i, one entry per row of the block
  std::vector<std::vector<Var>> jac(d, std::vector<Var>{Var(0.0)});
  std::vector<Var> terms;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const BlockLayer& layer = layers[l];
    const int in_f = layer.in_factor;
    const int out_f = layer.out_factor;
    const bool last = l + 1 == layers.size();
    std::vector<Var> next(d * out_f);
    std::vector<std::vector<Var>> next_jac(d, std::vector<Var>(out_f));
    for (int r = 0; r < d * out_f; ++r) {
      const int block = r / out_f;
      const int off_diag = block * in_f;
      const int at = layer.row_offset[r];
      const auto w = theta.subspan(at, off_diag);
      const auto v = theta.subspan(at + off_diag, in_f);
      const Var& log_g = theta[at + off_diag + in_f];
      const Var& bias = theta[at + off_diag + in_f + 1];
      std::vector<Var> diag(in_f);
      for (int q = 0; q < in_f; ++q) diag[q] = ad::exp(v[q]);
      const Var sumsq = ad::dot(w, w) + ad::dot(diag, diag);
      const Var log_scale = log_g - 0.5 * ad::log(sumsq);
      Var dot = ad::dot(diag, std::span<const Var>(x).subspan(off_diag, in_f));
      if (off_diag > 0) dot += ad::dot(w, std::span<const Var>(x).subspan(0, off_diag));
      const Var pre = bias + ad::exp(log_scale) * dot;
      terms.resize(in_f);
      for (int q = 0; q < in_f; ++q) terms[q] = log_scale + v[q] + jac[block][q];
      Var entry = ad::log_sum_exp(terms);
      if (last) {
        next[r] = pre;
      } else {
        next[r] = ad::tanh(pre);
        entry += ad::log_tanh_derivative(pre);
      }
      next_jac[block][r % out_f] = entry;
    }
    x = std::move(next);
    jac = std::move(next_jac);
  }
  if (log_diag != nullptr) {
    for (int i = 0; i < d; ++i) log_diag->push_back(jac[i][0]);
  }
  return x;
}

// ---- sampling and densities ---------------------------------------------------------

GuideDraw Guide::transport(std::span<const Var> theta, std::span<const double> noise) const {
  const int d = dim_;
  if (static_cast<int>(theta.size()) != num_params_) {
    throw std::invalid_argument("guide: expected " + std::to_string(num_params_) +
                                " variational parameters, got " + std::to_string(theta.size()));
  }
  if (static_cast<int>(noise.size()) != noise_dim()) {
    throw std::invalid_argument("guide: expected noise of length " +
                                std::to_string(noise_dim()));
  }
  GuideDraw out;
  out.u.resize(d);
  switch (kind_) {
    case GuideKind::Delta:
      std::copy(theta.begin(), theta.end(), out.u.begin());
      out.log_q = 0.0;
      break;
    case GuideKind::LaplaceApproximation:
      if (!finalized_) {
        std::copy(theta.begin(), theta.end(), out.u.begin());
        out.log_q = 0.0;
      } else {
        double log_q = std_normal_log(noise);
        for (int i = 0; i < d; ++i) {
          double s = laplace_mean_[i];
          for (int j = 0; j <= i; ++j) s += laplace_chol_(i, j) * noise[j];
          out.u[i] = s;
          log_q -= std::log(laplace_chol_(i, i));
        }
        out.log_q = log_q;
      }
      break;
    case GuideKind::Normal:
    case GuideKind::DiagonalNormal: {
      Var log_q = std_normal_log(noise);
      for (int i = 0; i < d; ++i) {
        const Var& log_scale = theta[scale_index_[i]];
        out.u[i] = theta[loc_index_[i]] + ad::exp(log_scale) * noise[i];
        log_q -= log_scale;
      }
      out.log_q = log_q;
      break;
    }
    case GuideKind::MultivariateNormal: {
      Var log_q = std_normal_log(noise);
      std::vector<Var> row;
      for (int i = 0; i < d; ++i) {
        const int base = d + i * (i + 1) / 2;
        const Var& log_diag = theta[base + i];
        Var s = theta[i] + ad::exp(log_diag) * noise[i];
        if (i > 0) {
          const std::vector<Var> eps = ad::constants(noise.subspan(0, i));
          s += ad::dot(theta.subspan(base, i), eps);
        }
        out.u[i] = s;
        log_q -= log_diag;
      }
      out.log_q = log_q;
      break;
    }
    case GuideKind::LowRankMultivariateNormal: {
      const auto w = theta.subspan(d, d * rank_);
      const auto log_scale = theta.subspan(d + d * rank_, d);
      const std::vector<Var> e1 = ad::constants(noise.subspan(0, rank_));
      std::vector<Var> x(d);
      for (int i = 0; i < d; ++i) {
        x[i] = ad::dot(w.subspan(i * rank_, rank_), e1) +
               ad::exp(log_scale[i]) * noise[rank_ + i];
        out.u[i] = theta[i] + x[i];
      }
      out.log_q = low_rank_log_density(x, w, log_scale, rank_);
      break;
    }
    case GuideKind::IAFNormal: {
      std::vector<Var> z = ad::constants(noise);
      Var log_det = 0.0;
      for (int f = 0; f < static_cast<int>(iaf_.size()); ++f) {
        if (f > 0) z = reversed(z);
        z = iaf_layer(theta, f, z, log_det);
      }
      out.u = std::move(z);
      out.log_q = std_normal_log(noise) - log_det;
      break;
    }
    case GuideKind::BNAFNormal: {
      std::vector<Var> z = ad::constants(noise);
      std::vector<Var> log_diag;
      for (int f = 0; f < static_cast<int>(bnaf_.size()); ++f) {
        if (f > 0) z = reversed(z);
        z = bnaf_flow(theta, f, z, &log_diag);
      }
      out.u = std::move(z);
      out.log_q = std_normal_log(noise) - ad::sum(log_diag);
      break;
    }
  }
  return out;
}

Guide::Draw Guide::sample(std::span<const double> theta, Rng& rng) const {
  const std::vector<double> noise = draw_noise(rng);
  const std::vector<Var> t = ad::constants(theta);
  const GuideDraw g = transport(t, noise);
  return {ad::values(g.u), g.log_q.value()};
}

double Guide::log_density(std::span<const double> theta, std::span<const double> u) const {
  const int d = dim_;
  if (static_cast<int>(u.size()) != d) throw std::invalid_argument("guide: wrong point size");
  switch (kind_) {
    case GuideKind::Delta:
      return std::equal(u.begin(), u.end(), theta.begin()) ? 0.0 : kNegInf;
    case GuideKind::LaplaceApproximation: {
      if (!finalized_) return std::equal(u.begin(), u.end(), theta.begin()) ? 0.0 : kNegInf;
      std::vector<double> eps(d);
      double log_q = 0.0;
      for (int i = 0; i < d; ++i) {
        double s = u[i] - laplace_mean_[i];
        for (int j = 0; j < i; ++j) s -= laplace_chol_(i, j) * eps[j];
        eps[i] = s / laplace_chol_(i, i);
        log_q -= std::log(laplace_chol_(i, i));
      }
      return log_q + std_normal_log(eps);
    }
    case GuideKind::Normal:
    case GuideKind::DiagonalNormal: {
      double log_q = 0.0;
      for (int i = 0; i < d; ++i) {
        const double log_scale = theta[scale_index_[i]];
        const double z = (u[i] - theta[loc_index_[i]]) / std::exp(log_scale);
        log_q -= 0.5 * z * z + kHalfLog2Pi + log_scale;
      }
      return log_q;
    }
    case GuideKind::MultivariateNormal: {
      std::vector<double> eps(d);
      double log_q = 0.0;
      for (int i = 0; i < d; ++i) {
        const int base = d + i * (i + 1) / 2;
        double s = u[i] - theta[i];
        for (int j = 0; j < i; ++j) s -= theta[base + j] * eps[j];
        eps[i] = s / std::exp(theta[base + i]);
        log_q -= theta[base + i];
      }
      return log_q + std_normal_log(eps);
    }
    case GuideKind::LowRankMultivariateNormal: {
      const std::vector<Var> t = ad::constants(theta);
      std::vector<Var> x(d);
      for (int i = 0; i < d; ++i) x[i] = u[i] - theta[i];
      const std::span<const Var> ts(t);
      return low_rank_log_density(x, ts.subspan(d, d * rank_), ts.subspan(d + d * rank_, d),
                                  rank_)
          .value();
    }
    case GuideKind::IAFNormal:
    case GuideKind::BNAFNormal: {
      if (d > 3) throw Unsupported("guide density: flows are inverted only for d <= 3");
      const std::vector<double> eps =
          kind_ == GuideKind::IAFNormal ? iaf_inverse(theta, u) : bnaf_inverse(theta, u);
      const std::vector<Var> t = ad::constants(theta);
      return transport(t, eps).log_q.value();
    }
  }
  return kNegInf;
}

std::vector<double> Guide::iaf_inverse(std::span<const double> theta,
                                       std::span<const double> u) const {
  if (kind_ != GuideKind::IAFNormal) throw std::invalid_argument("iaf_inverse: not an IAF guide");
  const int d = dim_;
  if (d > 16) throw Unsupported("iaf_inverse: d > 16");
  const std::vector<Var> t = ad::constants(theta);
  std::vector<double> y(u.begin(), u.end());
  for (int f = static_cast<int>(iaf_.size()) - 1; f >= 0; --f) {
    // output i of the MADE depends on z_1 .. z_{i-1} only
    std::vector<Var> z(d, Var(0.0));
    for (int i = 0; i < d; ++i) {
      const std::vector<Var> out = made(t, f, z);
      const double gate = ad::inv_logit(out[d + i].value() + config_.iaf_gate_bias);
      z[i] = (y[i] - (1.0 - gate) * out[i].value()) / gate;
    }
    y = ad::values(z);
    if (f > 0) y = reversed(y);
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw NonConvergence("iaf_inverse: non-finite solution");
  }
  return y;
}

std::vector<double> Guide::bnaf_inverse(std::span<const double> theta,
                                        std::span<const double> u) const {
  if (kind_ != GuideKind::BNAFNormal) {
    throw std::invalid_argument("bnaf_inverse: not a BNAF guide");
  }
  const int d = dim_;
  const std::vector<Var> t = ad::constants(theta);
  std::vector<double> y(u.begin(), u.end());
  for (int f = static_cast<int>(bnaf_.size()) - 1; f >= 0; --f) {
    std::vector<double> z(d, 0.0);
    for (int i = 0; i < d; ++i) {
      const auto coordinate = [&](double zi) {
        z[i] = zi;
        const std::vector<Var> zv = ad::constants(z);
        return bnaf_flow(t, f, zv, nullptr)[i].value();
      };
      z[i] = solve_increasing(coordinate, y[i]);
    }
    y = z;
    if (f > 0) y = reversed(y);
  }
  return y;
}

std::vector<double> Guide::bnaf_log_diagonal(std::span<const double> theta,
                                             std::span<const double> noise) const {
  if (kind_ != GuideKind::BNAFNormal) {
    throw std::invalid_argument("bnaf_log_diagonal: not a BNAF guide");
  }
  const std::vector<Var> t = ad::constants(theta);
  std::vector<Var> z = ad::constants(noise);
  std::vector<Var> log_diag;
  for (int f = 0; f < static_cast<int>(bnaf_.size()); ++f) {
    if (f > 0) z = reversed(z);
    z = bnaf_flow(t, f, z, &log_diag);
  }
  return ad::values(log_diag);
}

// ---- synthesis ----------------------------------------------------------------------

Guide synthesize(GuideKind kind, const BoundModel& model, const GuideConfig& config) {
  if (model.dim() == 0) throw UnsupportedDimension("guide: the model has no parameters");
  std::vector<int> sites;
  for (const LayoutEntry& e : model.layout().entries) {
    if (e.length > 0) sites.push_back(e.length);
  }
  return Guide(kind, model.dim(), config, sites);
}

Guide laplace_finalize(const Guide& guide, const BoundModel& model,
                       std::span<const double> theta_map) {
  if (guide.kind() != GuideKind::LaplaceApproximation) {
    throw std::invalid_argument("laplace_finalize: not a Laplace guide");
  }
  const int d = guide.dim();
  const Eigen::MatrixXd h = ad::hessian(model.pinned_log_joint_function(theta_map), theta_map);
  const Eigen::MatrixXd precision = -h;
  const double base = 1e-8 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());
  double jitter = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt;
  bool ok = false;
  for (int attempt = 0; attempt <= 9; ++attempt) {
    llt.compute(precision + jitter * Eigen::MatrixXd::Identity(d, d));
    if (llt.info() == Eigen::Success && (llt.matrixL().toDenseMatrix().diagonal().array() > 0).all()) {
      ok = true;
      break;
    }
    jitter = attempt == 0 ? base : 2.0 * jitter;
  }
  if (!ok) {
    throw HessianNotPD("laplace: the negative Hessian is not positive definite after jitter " +
                       std::to_string(jitter));
  }
  const Eigen::MatrixXd covariance = llt.solve(Eigen::MatrixXd::Identity(d, d));
  Eigen::LLT<Eigen::MatrixXd> cov_llt(0.5 * (covariance + covariance.transpose()));
  if (cov_llt.info() != Eigen::Success) throw HessianNotPD("laplace: covariance not positive definite");
  Guide out = guide;
  out.finalized_ = true;
  out.laplace_mean_ = Eigen::Map<const Eigen::VectorXd>(theta_map.data(), d);
  out.laplace_chol_ = cov_llt.matrixL();
  return out;
}

}  // namespace stanvi
