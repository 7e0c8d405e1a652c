// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "stanvi/autodiff.hpp"
#include "stanvi/rng.hpp"

namespace stanvi {

class BoundModel;

enum class GuideKind {
  Delta,
  Normal,
  DiagonalNormal,
  MultivariateNormal,
  LowRankMultivariateNormal,
  LaplaceApproximation,
  IAFNormal,
  BNAFNormal,
};

inline constexpr std::array<GuideKind, 8> kAllGuideKinds = {
    GuideKind::BNAFNormal,           GuideKind::Delta,
    GuideKind::DiagonalNormal,       GuideKind::IAFNormal,
    GuideKind::LaplaceApproximation, GuideKind::LowRankMultivariateNormal,
    GuideKind::MultivariateNormal,   GuideKind::Normal,
};

/// "DiagonalNormal", "BNAFNormal", ...
std::string_view to_string(GuideKind kind);
/// "diagonal-normal", "bnaf", ...
std::string_view cli_name(GuideKind kind);
/// Accepts either spelling.
std::optional<GuideKind> parse_guide_kind(std::string_view name);

struct GuideConfig {
  double init_scale = 0.1;
  double init_loc_jitter = 0.0;
  int rank = 0;                   // 0 picks max(1, d / 2)
  int iaf_num_flows = 3;
  std::vector<int> iaf_hidden;    // empty picks {2d, 2d}
  double iaf_gate_bias = 1.0;     // added to s before the sigmoid gate
  int bnaf_num_flows = 1;
  std::vector<int> bnaf_block_factors = {8, 8};

  /// Throws std::invalid_argument.
  void validate() const;
};

/// Reparameterised draw: u as a function of theta for fixed noise, and
/// log q(u).
struct GuideDraw {
  std::vector<ad::Var> u;
  ad::Var log_q;
};

/// Variational family over the model's unconstrained space.
///
/// theta layouts (d = model dimension):
///   Delta, Laplace:   loc[d]
///   DiagonalNormal:   loc[d], log_scale[d]
///   Normal:           per parameter site, loc[site], log_scale[site]
///   MultivariateNormal: loc[d], L row by row (j <= i), log on the diagonal
///   LowRank:          loc[d], W[d x rank] row-major, log_scale[d]
///                     (covariance diag(scale^2) + W W^T)
///   IAF:              per flow, MADE weights and biases for the connections
///                     the masks allow
///   BNAF:             per flow and layer, per output row: off-diagonal
///                     block weights, log diagonal block weights, log weight
///                     norm scale, bias
class Guide {
 public:
  Guide(GuideKind kind, int dim, GuideConfig config, std::vector<int> site_sizes = {});

  GuideKind kind() const { return kind_; }
  int dim() const { return dim_; }
  const GuideConfig& config() const { return config_; }
  int num_params() const { return num_params_; }
  /// Length of the noise vector transport consumes (0 for point masses).
  int noise_dim() const;
  /// Laplace after laplace_finalize.
  bool finalized() const { return finalized_; }
  const Eigen::VectorXd& laplace_mean() const { return laplace_mean_; }
  /// Lower Cholesky factor of the Laplace covariance.
  const Eigen::MatrixXd& laplace_cholesky() const { return laplace_chol_; }

  std::vector<double> init(Rng& rng) const;

  std::vector<double> draw_noise(Rng& rng) const;

  /// Deterministic in theta given noise of length noise_dim().
  GuideDraw transport(std::span<const ad::Var> theta, std::span<const double> noise) const;

  struct Draw {
    std::vector<double> u;
    double log_q;
  };
  Draw sample(std::span<const double> theta, Rng& rng) const;

  /// log q(u). Flows invert numerically and are limited to d <= 3
  /// (Unsupported otherwise).
  double log_density(std::span<const double> theta, std::span<const double> u) const;

  /// Base noise that the IAF maps to u. d <= 16.
  std::vector<double> iaf_inverse(std::span<const double> theta,
                                  std::span<const double> u) const;

  /// Base noise that the BNAF maps to u, by monotone coordinate-wise
  /// bisection. Throws NonConvergence when u lies outside the flow's range.
  std::vector<double> bnaf_inverse(std::span<const double> theta,
                                   std::span<const double> u) const;

  /// log of every diagonal Jacobian entry du_i / dz_i, flow by flow.
  std::vector<double> bnaf_log_diagonal(std::span<const double> theta,
                                        std::span<const double> noise) const;

  struct MaskedLayer {
    int in = 0;
    int out = 0;
    std::vector<std::vector<int>> inputs;  // per output unit
    std::vector<int> weight_offset;        // per output unit
    std::vector<int> bias_offset;
  };
  struct BlockLayer {
    int in_factor = 1;   // block width on the input side
    int out_factor = 1;  // block height on the output side
    /// Per output row: block-row i holds i * in_factor off-diagonal
    /// weights, in_factor log diagonal weights, the log norm scale, the bias.
    std::vector<int> row_offset;
  };

 private:
  friend Guide laplace_finalize(const Guide&, const BoundModel&, std::span<const double>);

  void build_iaf();
  void build_bnaf();

  std::vector<ad::Var> iaf_layer(std::span<const ad::Var> theta, int flow,
                                 std::span<const ad::Var> z, ad::Var& log_det) const;
  std::vector<ad::Var> made(std::span<const ad::Var> theta, int flow,
                            std::span<const ad::Var> z) const;
  std::vector<ad::Var> bnaf_flow(std::span<const ad::Var> theta, int flow,
                                 std::span<const ad::Var> z,
                                 std::vector<ad::Var>* log_diag) const;

  GuideKind kind_;
  int dim_;
  GuideConfig config_;
  int rank_ = 0;
  int num_params_ = 0;
  std::vector<int> loc_index_;
  std::vector<int> scale_index_;
  std::vector<std::vector<MaskedLayer>> iaf_;   // per flow
  std::vector<std::vector<BlockLayer>> bnaf_;   // per flow

  bool finalized_ = false;
  Eigen::VectorXd laplace_mean_;
  Eigen::MatrixXd laplace_chol_;
};

/// Guide for a bound model; Normal groups theta by the model's parameter
/// sites. Throws UnsupportedDimension when the model has no parameters.
Guide synthesize(GuideKind kind, const BoundModel& model, const GuideConfig& config = {});

/// Gaussian N(theta_map, (-H)^-1) with H the Hessian of the log joint at
/// theta_map (branches pinned at theta_map). A non positive-definite -H gets
/// jitter 1e-8 (1 + max |H_ii|) I, doubled up to 8 times, before
/// HessianNotPD is thrown.
Guide laplace_finalize(const Guide& guide, const BoundModel& model,
                       std::span<const double> theta_map);

}  // namespace stanvi
