#include "strokeforge/optim.hpp"

#include <cmath>

namespace strokeforge {

void adam_step(ParameterStore& params, AdamState& state, const AdamConfig& cfg) {
  for (const auto& p : params.all()) {
    if (!p.grad().all_finite()) {
      throw NonFiniteError("adam_step: non-finite gradient for parameter " + p.name());
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), state.step);
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), state.step);
  for (auto p : params.all()) {
    const Tensor grad = p.grad();
    auto [mit, m_new] = state.m.try_emplace(p.name(), p.shape(), 0.0f);
    auto [vit, v_new] = state.v.try_emplace(p.name(), p.shape(), 0.0f);
    if (mit->second.shape() != p.shape() || vit->second.shape() != p.shape()) {
      throw ShapeError("adam_step: moment shape mismatch for " + p.name());
    }
    auto m = mit->second.data();
    auto v = vit->second.data();
    auto w = p.mutable_value().data();
    const auto g = grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= static_cast<float>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

}  // namespace strokeforge
