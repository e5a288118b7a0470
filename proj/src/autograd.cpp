#include "strokeforge/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "gemm.hpp"

namespace strokeforge {

namespace {

thread_local bool g_grad_enabled = true;

using BackwardFn = std::function<void(Node&)>;

Var make_node(Tensor value, std::vector<Var> parents, const char* op, BackwardFn fn) {
  value.require_finite(op);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.shared());
    node->backward_fn = std::move(fn);
  }
  node->name = op;
  return Var(std::move(node));
}

// Gradient buffer of parent i, or nullptr when that parent takes no gradient.
Tensor* pgrad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_rank(const Var& a, int rank, const char* op) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(a.shape()));
  }
}

template <class Fwd, class Deriv>
Var unary(const Var& a, const char* op, Fwd fwd, Deriv deriv) {
  Tensor out(a.shape());
  const auto in = a.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(in[i]);
  // deriv(x, y) returns dy/dx given input x and output y.
  return make_node(std::move(out), {a}, op, [deriv](Node& self) {
    Tensor* ga = pgrad(self, 0);
    if (!ga) return;
    const auto x = self.parents[0]->value.data();
    const auto y = self.value.data();
    const auto g = self.grad.data();
    auto gd = ga->data();
    for (std::size_t i = 0; i < g.size(); ++i) gd[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0f);
  return grad;
}

Tensor Var::grad() const {
  if (node_->grad.shape() == node_->value.shape()) return node_->grad;
  return Tensor(node_->value.shape(), 0.0f);
}

void Var::zero_grad() {
  if (!node_->grad.empty()) node_->grad.fill(0.0f);
}

Var constant(Tensor value) {
  value.require_finite("constant");
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->name = "constant";
  return Var(std::move(node));
}

Var parameter(Tensor value, std::string name) {
  value.require_finite(name);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->name = std::move(name);
  return Var(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order with each node once.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer().data()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) {
      n->grad_buffer();
      n->backward_fn(*n);
      n->grad.require_finite("backward of " + n->name);
    }
  }
}

// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& w) {
  require_rank(a, 2, "matmul");
  require_rank(w, 2, "matmul");
  const int rows = a.dim(0), inner = a.dim(1), cols = w.dim(1);
  if (w.dim(0) != inner) {
    throw ShapeError("matmul: input " + shape_str(a.shape()) + " does not conform to weights " +
                     shape_str(w.shape()));
  }
  Tensor out({rows, cols}, 0.0f);
  detail::gemm_nn(rows, cols, inner, a.value().data().data(), w.value().data().data(),
                  out.data().data());
  return make_node(std::move(out), {a, w}, "matmul", [rows, inner, cols](Node& self) {
    const float* g = self.grad.data().data();
    if (Tensor* ga = pgrad(self, 0)) {
      detail::gemm_nt(rows, inner, cols, g, self.parents[1]->value.data().data(),
                      ga->data().data());
    }
    if (Tensor* gw = pgrad(self, 1)) {
      detail::gemm_tn(inner, cols, rows, self.parents[0]->value.data().data(), g,
                      gw->data().data());
    }
  });
}

Var add_bias(const Var& a, const Var& bias) {
  require_rank(a, 2, "add_bias");
  const int rows = a.dim(0), cols = a.dim(1);
  if (bias.value().rank() != 1 || bias.dim(0) != cols) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                     shape_str(a.shape()));
  }
  Tensor out = a.value();
  const auto b = bias.value().data();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.at(r, c) += b[c];
  return make_node(std::move(out), {a, bias}, "add_bias", [rows, cols](Node& self) {
    const auto g = self.grad.data();
    if (Tensor* ga = pgrad(self, 0)) {
      auto d = ga->data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (Tensor* gb = pgrad(self, 1)) {
      auto d = gb->data();
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) d[c] += g[static_cast<std::size_t>(r) * cols + c];
    }
  });
}

Var dense(const Var& input, const Var& weights, const Var& bias) {
  require_rank(input, 2, "dense");
  require_rank(weights, 2, "dense");
  if (input.dim(1) != weights.dim(0) || bias.value().rank() != 1 ||
      bias.dim(0) != weights.dim(1)) {
    throw ShapeError("dense: input " + shape_str(input.shape()) + " incompatible with weights " +
                     shape_str(weights.shape()) + " and bias " + shape_str(bias.shape()));
  }
  return add_bias(matmul(input, weights), bias);
}

namespace {

struct ConvGeometry {
  int batch, channels, height, width, kernels, stride;
  int out_h, out_w, pad_top, pad_left;
};

ConvGeometry conv_geometry(const Shape& in, const Shape& k, int stride) {
  ConvGeometry g{};
  g.batch = in[0];
  g.channels = in[1];
  g.height = in[2];
  g.width = in[3];
  g.kernels = k[0];
  g.stride = stride;
  g.out_h = (g.height + stride - 1) / stride;
  g.out_w = (g.width + stride - 1) / stride;
  g.pad_top = std::max((g.out_h - 1) * stride + 3 - g.height, 0) / 2;
  g.pad_left = std::max((g.out_w - 1) * stride + 3 - g.width, 0) / 2;
  return g;
}

// cols[(c*9 + ky*3 + kx), (oy*out_w + ox)] for one batch item.
void im2col(const ConvGeometry& g, const float* img, float* cols) {
  const int plane = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const float* src = img + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        float* dst = cols + static_cast<std::size_t>(c * 9 + ky * 3 + kx) * plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride + ky - g.pad_top;
          float* row = dst + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(row, row + g.out_w, 0.0f);
            continue;
          }
          const float* srow = src + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride + kx - g.pad_left;
            row[ox] = (ix >= 0 && ix < g.width) ? srow[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const float* cols, float* img) {
  const int plane = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    float* dst = img + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const float* src = cols + static_cast<std::size_t>(c * 9 + ky * 3 + kx) * plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride + ky - g.pad_top;
          if (iy < 0 || iy >= g.height) continue;
          const float* row = src + static_cast<std::size_t>(oy) * g.out_w;
          float* drow = dst + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride + kx - g.pad_left;
            if (ix >= 0 && ix < g.width) drow[ix] += row[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& input, const Var& kernels, int stride) {
  require_rank(input, 4, "conv2d");
  require_rank(kernels, 4, "conv2d");
  if (stride != 1 && stride != 2) throw ShapeError("conv2d: stride must be 1 or 2");
  const Shape& ks = kernels.shape();
  if (ks[2] != 3 || ks[3] != 3) {
    throw ShapeError("conv2d: kernels must be 3x3, got " + shape_str(ks));
  }
  if (ks[1] != input.dim(1)) {
    throw ShapeError("conv2d: input " + shape_str(input.shape()) + " has " +
                     std::to_string(input.dim(1)) + " channels but kernels " + shape_str(ks) +
                     " expect " + std::to_string(ks[1]));
  }
  if (input.dim(2) < 1 || input.dim(3) < 1) {
    throw ShapeError("conv2d: empty spatial extent " + shape_str(input.shape()));
  }
  const ConvGeometry g = conv_geometry(input.shape(), ks, stride);
  const int plane = g.out_h * g.out_w;
  const int patch = g.channels * 9;
  const std::size_t in_item = static_cast<std::size_t>(g.channels) * g.height * g.width;
  const std::size_t out_item = static_cast<std::size_t>(g.kernels) * plane;

  Tensor out({g.batch, g.kernels, g.out_h, g.out_w}, 0.0f);
  std::vector<float> cols(static_cast<std::size_t>(patch) * plane);
  for (int b = 0; b < g.batch; ++b) {
    im2col(g, input.value().data().data() + b * in_item, cols.data());
    detail::gemm_nn(g.kernels, plane, patch, kernels.value().data().data(), cols.data(),
                    out.data().data() + b * out_item);
  }
  return make_node(std::move(out), {input, kernels}, "conv2d",
                   [g, plane, patch, in_item, out_item](Node& self) {
                     const float* x = self.parents[0]->value.data().data();
                     const float* w = self.parents[1]->value.data().data();
                     const float* gout = self.grad.data().data();
                     Tensor* gx = pgrad(self, 0);
                     Tensor* gw = pgrad(self, 1);
                     std::vector<float> cols(static_cast<std::size_t>(patch) * plane);
                     for (int b = 0; b < g.batch; ++b) {
                       const float* gb = gout + b * out_item;
                       if (gw) {
                         im2col(g, x + b * in_item, cols.data());
                         detail::gemm_nt(g.kernels, patch, plane, gb, cols.data(),
                                         gw->data().data());
                       }
                       if (gx) {
                         std::fill(cols.begin(), cols.end(), 0.0f);
                         detail::gemm_tn(patch, plane, g.kernels, w, gb, cols.data());
                         col2im(g, cols.data(), gx->data().data() + b * in_item);
                       }
                     }
                   });
}

Var add_channel_bias(const Var& x, const Var& bias) {
  require_rank(x, 4, "add_channel_bias");
  const int batch = x.dim(0), ch = x.dim(1);
  const int plane = x.dim(2) * x.dim(3);
  if (bias.value().rank() != 1 || bias.dim(0) != ch) {
    throw ShapeError("add_channel_bias: bias " + shape_str(bias.shape()) + " vs input " +
                     shape_str(x.shape()));
  }
  Tensor out = x.value();
  auto o = out.data();
  const auto b = bias.value().data();
  for (int n = 0; n < batch; ++n)
    for (int c = 0; c < ch; ++c) {
      float* p = o.data() + (static_cast<std::size_t>(n) * ch + c) * plane;
      for (int i = 0; i < plane; ++i) p[i] += b[c];
    }
  return make_node(std::move(out), {x, bias}, "add_channel_bias",
                   [batch, ch, plane](Node& self) {
                     const auto g = self.grad.data();
                     if (Tensor* gx = pgrad(self, 0)) {
                       auto d = gx->data();
                       for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                     }
                     if (Tensor* gb = pgrad(self, 1)) {
                       auto d = gb->data();
                       for (int n = 0; n < batch; ++n)
                         for (int c = 0; c < ch; ++c) {
                           const float* p =
                               g.data() + (static_cast<std::size_t>(n) * ch + c) * plane;
                           double s = 0.0;
                           for (int i = 0; i < plane; ++i) s += p[i];
                           d[c] += static_cast<float>(s);
                         }
                     }
                   });
}

// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  auto o = out.data();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return make_node(std::move(out), {a, b}, "add", [](Node& self) {
    const auto g = self.grad.data();
    for (std::size_t p = 0; p < 2; ++p) {
      if (Tensor* gp = pgrad(self, p)) {
        auto d = gp->data();
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  auto o = out.data();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return make_node(std::move(out), {a, b}, "sub", [](Node& self) {
    const auto g = self.grad.data();
    if (Tensor* ga = pgrad(self, 0)) {
      auto d = ga->data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (Tensor* gb = pgrad(self, 1)) {
      auto d = gb->data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  Tensor out = a.value();
  auto o = out.data();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return make_node(std::move(out), {a, b}, "mul", [](Node& self) {
    const auto g = self.grad.data();
    const auto av = self.parents[0]->value.data();
    const auto bv = self.parents[1]->value.data();
    if (Tensor* ga = pgrad(self, 0)) {
      auto d = ga->data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
    }
    if (Tensor* gb = pgrad(self, 1)) {
      auto d = gb->data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  require_same(a, b, "div");
  Tensor out = a.value();
  auto o = out.data();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] /= bv[i];
  return make_node(std::move(out), {a, b}, "div", [](Node& self) {
    const auto g = self.grad.data();
    const auto y = self.value.data();
    const auto bv = self.parents[1]->value.data();
    if (Tensor* ga = pgrad(self, 0)) {
      auto d = ga->data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] / bv[i];
    }
    if (Tensor* gb = pgrad(self, 1)) {
      auto d = gb->data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i] * y[i] / bv[i];
    }
  });
}

Var scale(const Var& a, float s) {
  return unary(
      a, "scale", [s](float x) { return x * s; }, [s](float, float) { return s; });
}

Var add_scalar(const Var& a, float s) {
  return unary(
      a, "add_scalar", [s](float x) { return x + s; }, [](float, float) { return 1.0f; });
}

Var square(const Var& a) {
  return unary(
      a, "square", [](float x) { return x * x; }, [](float x, float) { return 2.0f * x; });
}

Var exp(const Var& a) {
  return unary(
      a, "exp", [](float x) { return std::exp(x); }, [](float, float y) { return y; });
}

Var log(const Var& a) {
  return unary(
      a, "log", [](float x) { return std::log(x); }, [](float x, float) { return 1.0f / x; });
}

Var relu(const Var& a) {
  return unary(
      a, "relu", [](float x) { return x > 0.0f ? x : 0.0f; },
      [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

Var elu(const Var& a) {
  return unary(
      a, "elu", [](float x) { return x > 0.0f ? x : std::expm1(x); },
      [](float x, float y) { return x > 0.0f ? 1.0f : y + 1.0f; });
}

Var tanh(const Var& a) {
  return unary(
      a, "tanh", [](float x) { return std::tanh(x); },
      [](float, float y) { return 1.0f - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, "sigmoid",
      [](float x) {
        if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
        const float e = std::exp(x);
        return e / (1.0f + e);
      },
      [](float, float y) { return y * (1.0f - y); });
}

Var clamp_max(const Var& a, float hi) {
  return unary(
      a, "clamp_max", [hi](float x) { return x > hi ? hi : x; },
      [hi](float x, float) { return x > hi ? 0.0f : 1.0f; });
}

Var clamp_min(const Var& a, float lo) {
  return unary(
      a, "clamp_min", [lo](float x) { return x < lo ? lo : x; },
      [lo](float x, float) { return x < lo ? 0.0f : 1.0f; });
}

// ---------------------------------------------------------------------------

Var softmax_rows(const Var& a) {
  require_rank(a, 2, "softmax_rows");
  const int rows = a.dim(0), cols = a.dim(1);
  Tensor out(a.shape());
  for (int r = 0; r < rows; ++r) {
    float m = -std::numeric_limits<float>::infinity();
    for (int c = 0; c < cols; ++c) m = std::max(m, a.value().at(r, c));
    double s = 0.0;
    for (int c = 0; c < cols; ++c) {
      out.at(r, c) = std::exp(a.value().at(r, c) - m);
      s += out.at(r, c);
    }
    for (int c = 0; c < cols; ++c) out.at(r, c) = static_cast<float>(out.at(r, c) / s);
  }
  return make_node(std::move(out), {a}, "softmax_rows", [rows, cols](Node& self) {
    Tensor* ga = pgrad(self, 0);
    if (!ga) return;
    for (int r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < cols; ++c) dot += self.grad.at(r, c) * self.value.at(r, c);
      for (int c = 0; c < cols; ++c)
        ga->at(r, c) +=
            self.value.at(r, c) * static_cast<float>(self.grad.at(r, c) - dot);
    }
  });
}

Var log_softmax_rows(const Var& a) {
  require_rank(a, 2, "log_softmax_rows");
  const int rows = a.dim(0), cols = a.dim(1);
  Tensor out(a.shape());
  for (int r = 0; r < rows; ++r) {
    float m = -std::numeric_limits<float>::infinity();
    for (int c = 0; c < cols; ++c) m = std::max(m, a.value().at(r, c));
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += std::exp(static_cast<double>(a.value().at(r, c) - m));
    const float lse = m + static_cast<float>(std::log(s));
    for (int c = 0; c < cols; ++c) out.at(r, c) = a.value().at(r, c) - lse;
  }
  return make_node(std::move(out), {a}, "log_softmax_rows", [rows, cols](Node& self) {
    Tensor* ga = pgrad(self, 0);
    if (!ga) return;
    for (int r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (int c = 0; c < cols; ++c) gsum += self.grad.at(r, c);
      for (int c = 0; c < cols; ++c)
        ga->at(r, c) += self.grad.at(r, c) -
                        static_cast<float>(std::exp(self.value.at(r, c)) * gsum);
    }
  });
}

Var logsumexp_rows(const Var& a) {
  require_rank(a, 2, "logsumexp_rows");
  const int rows = a.dim(0), cols = a.dim(1);
  Tensor out({rows, 1});
  for (int r = 0; r < rows; ++r) {
    float m = -std::numeric_limits<float>::infinity();
    for (int c = 0; c < cols; ++c) m = std::max(m, a.value().at(r, c));
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += std::exp(static_cast<double>(a.value().at(r, c) - m));
    out[static_cast<std::size_t>(r)] = m + static_cast<float>(std::log(s));
  }
  return make_node(std::move(out), {a}, "logsumexp_rows", [rows, cols](Node& self) {
    Tensor* ga = pgrad(self, 0);
    if (!ga) return;
    const Tensor& x = self.parents[0]->value;
    for (int r = 0; r < rows; ++r) {
      const float lse = self.value[static_cast<std::size_t>(r)];
      const float g = self.grad[static_cast<std::size_t>(r)];
      for (int c = 0; c < cols; ++c) ga->at(r, c) += g * std::exp(x.at(r, c) - lse);
    }
  });
}

Var sum_rows(const Var& a) {
  require_rank(a, 2, "sum_rows");
  const int rows = a.dim(0), cols = a.dim(1);
  Tensor out({rows, 1});
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += a.value().at(r, c);
    out[static_cast<std::size_t>(r)] = static_cast<float>(s);
  }
  return make_node(std::move(out), {a}, "sum_rows", [rows, cols](Node& self) {
    Tensor* ga = pgrad(self, 0);
    if (!ga) return;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) ga->at(r, c) += self.grad[static_cast<std::size_t>(r)];
  });
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (float v : a.value().data()) s += v;
  return make_node(Tensor::scalar(static_cast<float>(s)), {a}, "sum_all", [](Node& self) {
    Tensor* ga = pgrad(self, 0);
    if (!ga) return;
    const float g = self.grad[0];
    for (float& v : ga->data()) v += g;
  });
}

Var mean_all(const Var& a) { return scale(sum_all(a), 1.0f / static_cast<float>(a.size())); }

Var slice_cols(const Var& a, int start, int count) {
  require_rank(a, 2, "slice_cols");
  const int rows = a.dim(0), cols = a.dim(1);
  if (start < 0 || count <= 0 || start + count > cols) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) +
                     ") out of range for " + shape_str(a.shape()));
  }
  Tensor out({rows, count});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < count; ++c) out.at(r, c) = a.value().at(r, start + c);
  return make_node(std::move(out), {a}, "slice_cols", [rows, start, count](Node& self) {
    Tensor* ga = pgrad(self, 0);
    if (!ga) return;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < count; ++c) ga->at(r, start + c) += self.grad.at(r, c);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int rows = parts[0].dim(0);
  int total = 0;
  std::vector<int> widths;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  Tensor out({rows, total});
  int offset = 0;
  for (const auto& p : parts) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < p.dim(1); ++c) out.at(r, offset + c) = p.value().at(r, c);
    offset += p.dim(1);
  }
  return make_node(std::move(out), parts, "concat_cols", [rows, widths](Node& self) {
    int offset = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if (Tensor* gp = pgrad(self, i)) {
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < widths[i]; ++c) gp->at(r, c) += self.grad.at(r, offset + c);
      }
      offset += widths[i];
    }
  });
}

Var broadcast_cols(const Var& a, int n) {
  require_rank(a, 2, "broadcast_cols");
  if (a.dim(1) != 1) throw ShapeError("broadcast_cols: expected [B,1], got " + shape_str(a.shape()));
  const int rows = a.dim(0);
  Tensor out({rows, n});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < n; ++c) out.at(r, c) = a.value()[static_cast<std::size_t>(r)];
  return make_node(std::move(out), {a}, "broadcast_cols", [rows, n](Node& self) {
    Tensor* ga = pgrad(self, 0);
    if (!ga) return;
    for (int r = 0; r < rows; ++r) {
      double s = 0.0;
      for (int c = 0; c < n; ++c) s += self.grad.at(r, c);
      (*ga)[static_cast<std::size_t>(r)] += static_cast<float>(s);
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_node(std::move(out), {a}, "reshape", [](Node& self) {
    Tensor* ga = pgrad(self, 0);
    if (!ga) return;
    auto d = ga->data();
    const auto g = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

}  // namespace strokeforge
