#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "strokeforge/autograd.hpp"

namespace strokeforge {

using Rng = std::mt19937_64;

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, int fan_in, int fan_out, Rng& rng);

/// Named, insertion-ordered collection of trainable leaves.
class ParameterStore {
 public:
  Var add(const std::string& name, Tensor init);
  Var get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<Var>& all() const { return params_; }
  std::size_t count() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  /// Gradient per parameter name; zeros for parameters backward never reached.
  std::map<std::string, Tensor> gradients() const;

  /// Stop (or resume) gradient flow into every parameter.
  void set_frozen(bool frozen);
  bool frozen() const { return frozen_; }

  /// Replace values by name. Every stored parameter must be present with
  /// an identical shape.
  void assign(const std::map<std::string, Tensor>& values);
  std::map<std::string, Tensor> snapshot() const;

 private:
  std::vector<Var> params_;
  std::map<std::string, std::size_t> index_;
  bool frozen_ = false;
};

struct DenseLayer {
  Var weights;  // [in, out]
  Var bias;     // [out]

  static DenseLayer create(ParameterStore& store, const std::string& name, int in, int out,
                           Rng& rng);
  static DenseLayer bind(const ParameterStore& store, const std::string& name);
  Var operator()(const Var& x) const { return dense(x, weights, bias); }
  int in() const { return weights.dim(0); }
  int out() const { return weights.dim(1); }
};

struct ConvLayer {
  Var kernels;  // [out, in, 3, 3]
  Var bias;     // [out]
  int stride = 1;

  static ConvLayer create(ParameterStore& store, const std::string& name, int in, int out,
                          int stride, Rng& rng);
  static ConvLayer bind(const ParameterStore& store, const std::string& name, int stride);
  Var operator()(const Var& x) const { return add_channel_bias(conv2d(x, kernels, stride), bias); }
};

/// Gate blocks are laid out as [input, forget, candidate, output] along the
/// columns of a single [in + hidden, 4 * hidden] matrix.
struct LstmState {
  Var h;
  Var c;
};

std::pair<Var, Var> lstm_cell(const Var& x, const Var& h, const Var& c, const Var& weights,
                              const Var& bias);

struct LstmLayer {
  Var weights;  // [in + hidden, 4 * hidden]
  Var bias;     // [4 * hidden]

  static LstmLayer create(ParameterStore& store, const std::string& name, int in, int hidden,
                          Rng& rng);
  static LstmLayer bind(const ParameterStore& store, const std::string& name);
  int hidden() const { return bias.dim(0) / 4; }
  int in() const { return weights.dim(0) - hidden(); }
  LstmState operator()(const Var& x, const LstmState& s) const;
  LstmState zero_state(int batch) const;
};

}  // namespace strokeforge
