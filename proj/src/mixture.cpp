#include "strokeforge/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace strokeforge {

namespace {

template <class It>
void softmax_inplace(It begin, It end, double temperature = 1.0) {
  double m = -std::numeric_limits<double>::infinity();
  for (auto it = begin; it != end; ++it) m = std::max(m, static_cast<double>(*it) / temperature);
  double s = 0.0;
  std::vector<double> e;
  for (auto it = begin; it != end; ++it) {
    e.push_back(std::exp(static_cast<double>(*it) / temperature - m));
    s += e.back();
  }
  std::size_t i = 0;
  for (auto it = begin; it != end; ++it) *it = static_cast<float>(e[i++] / s);
}

std::size_t categorical(std::span<const float> probs, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding left u above the accumulated mass: take the last nonzero entry.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0f) return i;
  return probs.size() - 1;
}

}  // namespace

MixtureParams parameterize(std::span<const float> head, int mixtures) {
  if (static_cast<int>(head.size()) != head_size(mixtures)) {
    throw ShapeError("mixture head has " + std::to_string(head.size()) + " values, expected " +
                     std::to_string(head_size(mixtures)) + " for " + std::to_string(mixtures) +
                     " components");
  }
  const auto m = static_cast<std::size_t>(mixtures);
  auto block = [&](std::size_t k) {
    return std::vector<float>(head.begin() + static_cast<std::ptrdiff_t>(k * m),
                              head.begin() + static_cast<std::ptrdiff_t>((k + 1) * m));
  };
  MixtureParams p;
  p.weights = block(0);
  softmax_inplace(p.weights.begin(), p.weights.end());
  p.mu_x = block(1);
  p.mu_y = block(2);
  p.sigma_x = block(3);
  p.sigma_y = block(4);
  p.corr = block(5);
  for (auto& s : p.sigma_x) s = std::exp(s);
  for (auto& s : p.sigma_y) s = std::exp(s);
  for (auto& c : p.corr) c = std::tanh(c);
  for (std::size_t k = 0; k < 3; ++k) p.pen_logits[k] = head[6 * m + k];
  p.pen_probs = p.pen_logits;
  softmax_inplace(p.pen_probs.begin(), p.pen_probs.end());
  return p;
}

std::vector<float> blend_heads(std::span<const float> rnn, std::span<const float> cnn, float alpha) {
  if (rnn.size() != cnn.size()) {
    throw ShapeError("blend: head sizes differ (" + std::to_string(rnn.size()) + " vs " +
                     std::to_string(cnn.size()) + ")");
  }
  if (!(alpha >= 0.0f && alpha <= 1.0f)) throw Error("blend: alpha must lie in [0, 1]");
  if (alpha == 1.0f) return {rnn.begin(), rnn.end()};
  if (alpha == 0.0f) return {cnn.begin(), cnn.end()};
  std::vector<float> out(rnn.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * rnn[i] + (1.0f - alpha) * cnn[i];
  return out;
}

MixtureParams blend(std::span<const float> rnn, std::span<const float> cnn, float alpha,
                    int mixtures) {
  const auto h = blend_heads(rnn, cnn, alpha);
  return parameterize(h, mixtures);
}

double bivariate_normal_density(double x, double y, double mu_x, double mu_y, double sigma_x,
                                double sigma_y, double corr) {
  const double zx = (x - mu_x) / sigma_x;
  const double zy = (y - mu_y) / sigma_y;
  const double one_minus = 1.0 - corr * corr;
  const double q = zx * zx + zy * zy - 2.0 * corr * zx * zy;
  return std::exp(-q / (2.0 * one_minus)) /
         (2.0 * std::numbers::pi * sigma_x * sigma_y * std::sqrt(one_minus));
}

double mixture_density(const MixtureParams& p, double x, double y) {
  double s = 0.0;
  for (int j = 0; j < p.components(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    s += p.weights[k] * bivariate_normal_density(x, y, p.mu_x[k], p.mu_y[k], p.sigma_x[k],
                                                 p.sigma_y[k], p.corr[k]);
  }
  return s;
}

double gmm_nll(const MixtureParams& p, double dx, double dy) {
  std::vector<double> terms;
  terms.reserve(p.weights.size());
  for (int j = 0; j < p.components(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    const double zx = (dx - p.mu_x[k]) / p.sigma_x[k];
    const double zy = (dy - p.mu_y[k]) / p.sigma_y[k];
    const double rho = p.corr[k];
    const double one_minus = 1.0 - rho * rho;
    const double q = zx * zx + zy * zy - 2.0 * rho * zx * zy;
    terms.push_back(std::log(static_cast<double>(p.weights[k])) - std::log(2.0 * std::numbers::pi) -
                    std::log(static_cast<double>(p.sigma_x[k])) -
                    std::log(static_cast<double>(p.sigma_y[k])) - 0.5 * std::log(one_minus) -
                    q / (2.0 * one_minus));
  }
  const double m = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  const double log_density = std::max(m + std::log(s), std::log(kDensityFloor));
  return -log_density;
}

double loss_offsets(const std::vector<MixtureParams>& steps, const StrokeSequence& targets,
                    int s_max) {
  const int stop = targets.stop_index();
  if (stop == 0) throw DataError("offset loss: targets carry no end-of-sketch point");
  if (static_cast<int>(steps.size()) < stop) {
    throw ShapeError("offset loss: " + std::to_string(steps.size()) +
                     " step outputs for a stop index of " + std::to_string(stop));
  }
  double sum = 0.0;
  for (int i = 0; i < stop; ++i) {
    const auto& t = targets.points[static_cast<std::size_t>(i)];
    sum += gmm_nll(steps[static_cast<std::size_t>(i)], t.dx, t.dy);
  }
  return sum / s_max;
}

double loss_pen(const std::vector<MixtureParams>& steps, const StrokeSequence& targets, int s_max) {
  if (static_cast<int>(steps.size()) < s_max) {
    throw ShapeError("pen loss: " + std::to_string(steps.size()) + " step outputs for s_max " +
                     std::to_string(s_max));
  }
  const auto padded = padded_points(targets, s_max);
  double sum = 0.0;
  for (int i = 0; i < s_max; ++i) {
    const auto k = static_cast<std::size_t>(padded[static_cast<std::size_t>(i)].pen);
    sum -= std::log(static_cast<double>(steps[static_cast<std::size_t>(i)].pen_probs[k]));
  }
  return sum / s_max;
}

double loss_kl(std::span<const float> mu, std::span<const float> sigma) {
  if (mu.size() != sigma.size() || mu.empty()) throw ShapeError("loss_kl: mu/sigma size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(sigma[i] > 0.0f)) throw Error("loss_kl: sigma must be positive");
    const double var = static_cast<double>(sigma[i]) * sigma[i];
    s += 1.0 + std::log(var) - static_cast<double>(mu[i]) * mu[i] - var;
  }
  return -0.5 * s / static_cast<double>(mu.size());
}

MixtureParams with_temperature(const MixtureParams& p, double temperature) {
  if (!(temperature > 0.0)) throw Error("temperature must be positive");
  MixtureParams q = p;
  for (auto& w : q.weights) w = static_cast<float>(std::log(std::max<double>(w, 1e-38)));
  softmax_inplace(q.weights.begin(), q.weights.end(), temperature);
  q.pen_probs = q.pen_logits;
  softmax_inplace(q.pen_probs.begin(), q.pen_probs.end(), temperature);
  const float root = static_cast<float>(std::sqrt(temperature));
  for (auto& s : q.sigma_x) s *= root;
  for (auto& s : q.sigma_y) s *= root;
  return q;
}

Stroke5Point sample_point(const MixtureParams& p, double temperature, Rng& rng) {
  const MixtureParams q = with_temperature(p, temperature);
  const std::size_t j = categorical(q.weights, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double n1 = normal(rng);
  const double n2 = normal(rng);
  const double rho = q.corr[j];
  const double dx = q.mu_x[j] + q.sigma_x[j] * n1;
  const double dy = q.mu_y[j] + q.sigma_y[j] * (rho * n1 + std::sqrt(1.0 - rho * rho) * n2);
  const std::size_t pen = categorical(q.pen_probs, rng);
  return {static_cast<float>(dx), static_cast<float>(dy), static_cast<Pen>(pen)};
}

// ---------------------------------------------------------------------------

Var mixture_nll(const Var& head, const Tensor& dx, const Tensor& dy, int mixtures) {
  const int m = mixtures;
  if (head.value().rank() != 2 || head.dim(1) != head_size(m)) {
    throw ShapeError("mixture_nll: head " + shape_str(head.shape()) + " does not hold " +
                     std::to_string(m) + " components");
  }
  const float log_two_pi = static_cast<float>(std::log(2.0 * std::numbers::pi));
  Var log_w = log_softmax_rows(slice_cols(head, 0, m));
  Var mu_x = slice_cols(head, m, m);
  Var mu_y = slice_cols(head, 2 * m, m);
  Var log_sx = slice_cols(head, 3 * m, m);
  Var log_sy = slice_cols(head, 4 * m, m);
  Var rho = tanh(slice_cols(head, 5 * m, m));

  Var zx = (broadcast_cols(constant(dx), m) - mu_x) / exp(log_sx);
  Var zy = (broadcast_cols(constant(dy), m) - mu_y) / exp(log_sy);
  Var one_minus = clamp_min(add_scalar(scale(square(rho), -1.0f), 1.0f), 1e-6f);
  Var q = square(zx) + square(zy) - scale(rho * zx * zy, 2.0f);
  Var log_n = add_scalar(scale(log_sx + log_sy + scale(log(one_minus), 0.5f), -1.0f), -log_two_pi) -
              scale(q / one_minus, 0.5f);
  Var lse = logsumexp_rows(log_w + log_n);
  return clamp_max(scale(lse, -1.0f), static_cast<float>(-std::log(kDensityFloor)));
}

Var pen_cross_entropy(const Var& head, const Tensor& one_hot, int mixtures) {
  Var logp = log_softmax_rows(slice_cols(head, 6 * mixtures, 3));
  return scale(sum_rows(logp * constant(one_hot)), -1.0f);
}

Var kl_divergence(const Var& mu, const Var& logvar) {
  // -1/2 (1 + logvar - mu^2 - exp(logvar)), averaged over latent dims and batch.
  Var terms = add_scalar(logvar - square(mu) - exp(logvar), 1.0f);
  return scale(mean_all(terms), -0.5f);
}

}  // namespace strokeforge
