#pragma once

#include <map>
#include <string>

#include "strokeforge/layers.hpp"

namespace strokeforge {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// First and second moment estimates keyed by parameter name.
struct AdamState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  long step = 0;
};

/// One bias-corrected Adam update of every parameter in `params` from its
/// accumulated gradient. Throws NonFiniteError naming the first parameter
/// whose gradient holds NaN or Inf; nothing is updated in that case.
void adam_step(ParameterStore& params, AdamState& state, const AdamConfig& cfg);

class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  void step(ParameterStore& params) { adam_step(params, state_, cfg_); }
  AdamState& state() { return state_; }
  const AdamState& state() const { return state_; }
  AdamConfig& config() { return cfg_; }

 private:
  AdamConfig cfg_;
  AdamState state_;
};

}  // namespace strokeforge
