#pragma once

// Define-by-run reverse-mode differentiation. Every op builds a fresh node
// holding its value and a closure that pushes the node's gradient into its
// parents; backward() walks the graph in reverse topological order.

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "strokeforge/tensor.hpp"

namespace strokeforge {

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;
  std::string name;

  Tensor& grad_buffer();
};

/// Handle to a graph node. Cheap to copy; copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int i) const { return node_->value.dim(i); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& name() const { return node_->name; }

  /// Accumulated gradient; a zero tensor if backward never reached this node.
  Tensor grad() const;
  void zero_grad();

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

/// Constant leaf: never receives a gradient.
Var constant(Tensor value);
/// Trainable leaf.
Var parameter(Tensor value, std::string name);

/// Disables graph recording on this thread while alive (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

/// Reverse sweep from a one-element loss. Gradients accumulate into every
/// reachable node that requires grad.
void backward(const Var& loss);

// ---------------------------------------------------------------------------
// Linear algebra

/// a[B,I] x w[I,O] -> [B,O]
Var matmul(const Var& a, const Var& w);
/// a[B,O] + bias[O] broadcast over rows.
Var add_bias(const Var& a, const Var& bias);
/// input[B,I] x weights[I,O] + bias[O]
Var dense(const Var& input, const Var& weights, const Var& bias);

/// Same-padded 3x3 cross-correlation, input [B,C,H,W], kernels [K,C,3,3].
/// Output spatial size is ceil(H/stride) x ceil(W/stride).
Var conv2d(const Var& input, const Var& kernels, int stride);
/// x[B,K,H,W] + bias[K] per channel.
Var add_channel_bias(const Var& x, const Var& bias);

// ---------------------------------------------------------------------------
// Elementwise

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, float s);
Var add_scalar(const Var& a, float s);
Var square(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var relu(const Var& a);
Var elu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
/// min(a, hi); gradient zero where clipped.
Var clamp_max(const Var& a, float hi);
/// max(a, lo); gradient zero where clipped.
Var clamp_min(const Var& a, float lo);

// ---------------------------------------------------------------------------
// Row-wise (2-D) reductions and reshaping

Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
/// [B,N] -> [B,1]
Var logsumexp_rows(const Var& a);
/// [B,N] -> [B,1]
Var sum_rows(const Var& a);
Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var slice_cols(const Var& a, int start, int count);
Var concat_cols(const std::vector<Var>& parts);
/// [B,1] -> [B,n]
Var broadcast_cols(const Var& a, int n);
Var reshape(const Var& a, Shape shape);

// ---------------------------------------------------------------------------
// Operator sugar

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }

}  // namespace strokeforge
