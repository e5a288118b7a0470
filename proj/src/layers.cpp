#include "strokeforge/layers.hpp"

#include <cmath>

namespace strokeforge {

Tensor glorot_uniform(Shape shape, int fan_in, int fan_out, Rng& rng) {
  const float limit = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
  std::uniform_real_distribution<float> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = dist(rng);
  return t;
}

Var ParameterStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) throw Error("duplicate parameter name: " + name);
  Var v = parameter(std::move(init), name);
  v.node()->requires_grad = !frozen_;
  index_[name] = params_.size();
  params_.push_back(v);
  return v;
}

Var ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter: " + name);
  return params_[it->second];
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::map<std::string, Tensor> ParameterStore::gradients() const {
  std::map<std::string, Tensor> out;
  for (const auto& p : params_) out.emplace(p.name(), p.grad());
  return out;
}

void ParameterStore::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (auto& p : params_) p.node()->requires_grad = !frozen;
}

void ParameterStore::assign(const std::map<std::string, Tensor>& values) {
  for (auto& p : params_) {
    auto it = values.find(p.name());
    if (it == values.end()) throw DataError("checkpoint is missing parameter " + p.name());
    if (it->second.shape() != p.shape()) {
      throw DataError("parameter " + p.name() + " has shape " + shape_str(it->second.shape()) +
                      " in checkpoint but model expects " + shape_str(p.shape()));
    }
    p.mutable_value() = it->second;
  }
}

std::map<std::string, Tensor> ParameterStore::snapshot() const {
  std::map<std::string, Tensor> out;
  for (const auto& p : params_) out.emplace(p.name(), p.value());
  return out;
}

// ---------------------------------------------------------------------------

DenseLayer DenseLayer::create(ParameterStore& store, const std::string& name, int in, int out,
                              Rng& rng) {
  return {store.add(name + ".w", glorot_uniform({in, out}, in, out, rng)),
          store.add(name + ".b", Tensor({out}, 0.0f))};
}

DenseLayer DenseLayer::bind(const ParameterStore& store, const std::string& name) {
  return {store.get(name + ".w"), store.get(name + ".b")};
}

ConvLayer ConvLayer::create(ParameterStore& store, const std::string& name, int in, int out,
                            int stride, Rng& rng) {
  return {store.add(name + ".k", glorot_uniform({out, in, 3, 3}, in * 9, out * 9, rng)),
          store.add(name + ".b", Tensor({out}, 0.0f)), stride};
}

ConvLayer ConvLayer::bind(const ParameterStore& store, const std::string& name, int stride) {
  return {store.get(name + ".k"), store.get(name + ".b"), stride};
}

std::pair<Var, Var> lstm_cell(const Var& x, const Var& h, const Var& c, const Var& weights,
                              const Var& bias) {
  const int hidden = h.dim(1);
  if (weights.dim(0) != x.dim(1) + hidden || weights.dim(1) != 4 * hidden ||
      bias.dim(0) != 4 * hidden || c.shape() != h.shape() || x.dim(0) != h.dim(0)) {
    throw ShapeError("lstm_cell: x " + shape_str(x.shape()) + ", h " + shape_str(h.shape()) +
                     ", c " + shape_str(c.shape()) + " do not fit weights " +
                     shape_str(weights.shape()));
  }
  Var gates = dense(concat_cols({x, h}), weights, bias);
  Var in_gate = sigmoid(slice_cols(gates, 0, hidden));
  Var forget_gate = sigmoid(slice_cols(gates, hidden, hidden));
  Var candidate = tanh(slice_cols(gates, 2 * hidden, hidden));
  Var out_gate = sigmoid(slice_cols(gates, 3 * hidden, hidden));
  Var c_next = forget_gate * c + in_gate * candidate;
  Var h_next = out_gate * tanh(c_next);
  return {h_next, c_next};
}

LstmLayer LstmLayer::create(ParameterStore& store, const std::string& name, int in, int hidden,
                            Rng& rng) {
  Tensor w({in + hidden, 4 * hidden});
  const float input_limit = std::sqrt(6.0f / static_cast<float>(in + 4 * hidden));
  const float recurrent_limit = 1.0f / std::sqrt(static_cast<float>(hidden));
  std::uniform_real_distribution<float> input_dist(-input_limit, input_limit);
  std::uniform_real_distribution<float> recurrent_dist(-recurrent_limit, recurrent_limit);
  for (int r = 0; r < in + hidden; ++r)
    for (int col = 0; col < 4 * hidden; ++col)
      w.at(r, col) = r < in ? input_dist(rng) : recurrent_dist(rng);
  return {store.add(name + ".w", std::move(w)), store.add(name + ".b", Tensor({4 * hidden}, 0.0f))};
}

LstmLayer LstmLayer::bind(const ParameterStore& store, const std::string& name) {
  return {store.get(name + ".w"), store.get(name + ".b")};
}

LstmState LstmLayer::operator()(const Var& x, const LstmState& s) const {
  auto [h, c] = lstm_cell(x, s.h, s.c, weights, bias);
  return {h, c};
}

LstmState LstmLayer::zero_state(int batch) const {
  return {constant(Tensor({batch, hidden()}, 0.0f)), constant(Tensor({batch, hidden()}, 0.0f))};
}

}  // namespace strokeforge
