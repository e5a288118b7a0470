#pragma once

// Mixture density head shared by the recurrent decoder and the CNN refiner.
//
// Raw head layout for M components (6M + 3 values):
//   [0, M)      mixture logits         -> weights  = softmax
//   [M, 2M)     mean x
//   [2M, 3M)    mean y
//   [3M, 4M)    log sigma x            -> sigma_x  = exp
//   [4M, 5M)    log sigma y            -> sigma_y  = exp
//   [5M, 6M)    raw correlation        -> corr_xy  = tanh
//   [6M, 6M+3)  pen logits (p1, p2, p3)

#include <array>
#include <span>
#include <vector>

#include "strokeforge/autograd.hpp"
#include "strokeforge/layers.hpp"
#include "strokeforge/stroke.hpp"

namespace strokeforge {

constexpr int head_size(int mixtures) { return 6 * mixtures + 3; }

/// Density floor applied before taking logs in the offset likelihood.
inline constexpr double kDensityFloor = 1e-30;

struct MixtureParams {
  std::vector<float> weights;
  std::vector<float> mu_x, mu_y;
  std::vector<float> sigma_x, sigma_y;
  std::vector<float> corr;
  std::array<float, 3> pen_logits{};
  std::array<float, 3> pen_probs{};

  int components() const { return static_cast<int>(weights.size()); }
};

MixtureParams parameterize(std::span<const float> head, int mixtures);

/// Raw pre-activation combination alpha * rnn + (1 - alpha) * cnn.
/// alpha == 1 and alpha == 0 return the corresponding input unchanged.
std::vector<float> blend_heads(std::span<const float> rnn, std::span<const float> cnn, float alpha);
MixtureParams blend(std::span<const float> rnn, std::span<const float> cnn, float alpha,
                    int mixtures);

double bivariate_normal_density(double x, double y, double mu_x, double mu_y, double sigma_x,
                                double sigma_y, double corr);
double mixture_density(const MixtureParams& p, double x, double y);

/// -log sum_j w_j N(dx, dy | component j), stabilized with log-sum-exp and
/// with the mixture density floored at kDensityFloor.
double gmm_nll(const MixtureParams& p, double dx, double dy);

/// Offset loss: per-step gmm_nll summed up to and including the first
/// SketchEnd target, divided by s_max.
double loss_offsets(const std::vector<MixtureParams>& steps, const StrokeSequence& targets,
                    int s_max);
/// Pen loss: cross-entropy against one-hot targets at every step up to s_max
/// (targets padded with SketchEnd), divided by s_max.
double loss_pen(const std::vector<MixtureParams>& steps, const StrokeSequence& targets, int s_max);
/// KL(N(mu, sigma^2) || N(0, 1)) averaged over the latent dimensions.
double loss_kl(std::span<const float> mu, std::span<const float> sigma);

/// Temperature-adjusted copy: weights and pen probabilities re-softmaxed at
/// logits / temperature, sigmas scaled by sqrt(temperature).
MixtureParams with_temperature(const MixtureParams& p, double temperature);
/// Draws the next point: component, then correlated offset, then pen state.
Stroke5Point sample_point(const MixtureParams& p, double temperature, Rng& rng);

// ---------------------------------------------------------------------------
// Differentiable forms over a batch of raw heads [B, 6M+3].

/// Per-row offset NLL [B,1]; dx, dy are [B,1] targets.
Var mixture_nll(const Var& head, const Tensor& dx, const Tensor& dy, int mixtures);
/// Per-row pen cross-entropy [B,1]; one_hot is [B,3].
Var pen_cross_entropy(const Var& head, const Tensor& one_hot, int mixtures);
/// Mean over batch of per-row KL; mu and logvar are [B,Z].
Var kl_divergence(const Var& mu, const Var& logvar);

}  // namespace strokeforge
