#include "gsf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "gsf/kernels.hpp"

namespace gsf::ad {

namespace {

thread_local bool g_recording = true;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

void accumulate(const NodePtr& p, const Tensor& g) {
  if (!p->requires_grad) return;
  if (p->grad.empty()) {
    p->grad = g;
    return;
  }
  auto dst = p->grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Var make(Tensor value, const char* op, std::vector<NodePtr> parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  bool needs = false;
  if (g_recording)
    for (const auto& p : parents) needs = needs || p->requires_grad;
  if (needs) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward = std::move(bw);
  }
  return Var(std::move(n));
}

template <typename F, typename D>
Var unary(const Var& a, const char* op, F f, D dfdx) {
  Tensor out(a.shape());
  const auto& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  NodePtr pa = a.node();
  return make(std::move(out), op, {pa}, [pa, dfdx](Node& self) {
    Tensor g(pa->value.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * dfdx(pa->value[i], self.value[i]);
    accumulate(pa, g);
  });
}

void require_same(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

// Split a shape into (outer, extent, inner) around `axis`.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

Tensor Var::grad() const {
  if (node_->grad.empty()) return Tensor(node_->value.shape());
  return node_->grad;
}

double Var::item() const {
  if (node_->value.size() != 1) throw std::logic_error("item: tensor is not scalar " + shape_string(shape()));
  return node_->value[0];
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "constant";
  return Var(std::move(n));
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "parameter";
  n->requires_grad = true;
  return Var(std::move(n));
}

NoGradGuard::NoGradGuard() : previous_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = previous_; }
bool recording() { return g_recording; }

Var add(const Var& a, const Var& b) {
  require_same("add", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  NodePtr pa = a.node(), pb = b.node();
  return make(std::move(out), "add", {pa, pb}, [pa, pb](Node& self) {
    accumulate(pa, self.grad);
    accumulate(pb, self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same("sub", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  NodePtr pa = a.node(), pb = b.node();
  return make(std::move(out), "sub", {pa, pb}, [pa, pb](Node& self) {
    accumulate(pa, self.grad);
    if (pb->requires_grad) {
      Tensor g = self.grad;
      for (auto& v : g.data()) v = -v;
      accumulate(pb, g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same("mul", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  NodePtr pa = a.node(), pb = b.node();
  return make(std::move(out), "mul", {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= pb->value[i];
      accumulate(pa, g);
    }
    if (pb->requires_grad) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= pa->value[i];
      accumulate(pb, g);
    }
  });
}

Var scale(const Var& a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var mul_const(const Var& a, const Tensor& w) {
  if (a.shape() != w.shape()) shape_error("mul_const", a.shape(), w.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= w[i];
  NodePtr pa = a.node();
  return make(std::move(out), "mul_const", {pa}, [pa, w](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= w[i];
    accumulate(pa, g);
  });
}

Var add_row(const Var& x, const Var& row) {
  if (x.value().rank() != 2 || row.value().rank() != 1 || row.shape()[0] != x.shape()[1])
    shape_error("add_row", x.shape(), row.shape());
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  Tensor out = x.value();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) += row.value()[j];
  NodePtr px = x.node(), pr = row.node();
  return make(std::move(out), "add_row", {px, pr}, [px, pr, rows, cols](Node& self) {
    accumulate(px, self.grad);
    if (pr->requires_grad) {
      Tensor g({cols});
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) g[j] += self.grad.at(i, j);
      accumulate(pr, g);
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.shape()[1] != b.shape()[0])
    shape_error("matmul", a.shape(), b.shape());
  Tensor out = kernels::matmul(a.value(), b.value());
  NodePtr pa = a.node(), pb = b.node();
  return make(std::move(out), "matmul", {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) accumulate(pa, kernels::matmul(self.grad, transpose2d(pb->value)));
    if (pb->requires_grad) accumulate(pb, kernels::matmul(transpose2d(pa->value), self.grad));
  });
}

Var transpose(const Var& a) {
  if (a.value().rank() != 2) throw std::invalid_argument("transpose: expected rank 2, got " + shape_string(a.shape()));
  NodePtr pa = a.node();
  return make(transpose2d(a.value()), "transpose", {pa},
              [pa](Node& self) { accumulate(pa, transpose2d(self.grad)); });
}

Var reshape(const Var& a, Shape shape) {
  if (shape_size(shape) != a.size()) shape_error("reshape", a.shape(), shape);
  NodePtr pa = a.node();
  return make(a.value().reshaped(std::move(shape)), "reshape", {pa},
              [pa](Node& self) { accumulate(pa, self.grad.reshaped(pa->value.shape())); });
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= a.value().rank() || begin >= end || end > a.shape()[axis]) {
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                                ") on axis " + std::to_string(axis) + " invalid for " + shape_string(a.shape()));
  }
  const AxisSplit s = split_axis(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const std::size_t len = end - begin;
  Tensor out(out_shape);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < len; ++e)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[(o * len + e) * s.inner + i] = a.value()[(o * s.extent + begin + e) * s.inner + i];
  NodePtr pa = a.node();
  return make(std::move(out), "slice", {pa}, [pa, s, begin, len](Node& self) {
    Tensor g(pa->value.shape());
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t e = 0; e < len; ++e)
        for (std::size_t i = 0; i < s.inner; ++i)
          g[(o * s.extent + begin + e) * s.inner + i] = self.grad[(o * len + e) * s.inner + i];
    accumulate(pa, g);
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Shape out_shape = parts[0].shape();
  if (axis >= out_shape.size()) throw std::invalid_argument("concat: axis out of range");
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != out_shape.size()) shape_error("concat", parts[0].shape(), s);
    for (std::size_t d = 0; d < s.size(); ++d)
      if (d != axis && s[d] != parts[0].shape()[d]) shape_error("concat", parts[0].shape(), s);
    out_shape[axis] += s[axis];
  }
  const AxisSplit so = split_axis(out_shape, axis);
  Tensor out(out_shape);
  std::vector<NodePtr> nodes;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t ext = p.shape()[axis];
    for (std::size_t o = 0; o < so.outer; ++o)
      for (std::size_t e = 0; e < ext; ++e)
        for (std::size_t i = 0; i < so.inner; ++i)
          out[(o * so.extent + offset + e) * so.inner + i] = p.value()[(o * ext + e) * so.inner + i];
    nodes.push_back(p.node());
    offsets.push_back(offset);
    offset += ext;
  }
  std::vector<NodePtr> parents = nodes;
  return make(std::move(out), "concat", std::move(parents), [nodes, offsets, so, axis](Node& self) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const auto& p = nodes[k];
      if (!p->requires_grad) continue;
      const std::size_t ext = p->value.shape()[axis];
      Tensor g(p->value.shape());
      for (std::size_t o = 0; o < so.outer; ++o)
        for (std::size_t e = 0; e < ext; ++e)
          for (std::size_t i = 0; i < so.inner; ++i)
            g[(o * ext + e) * so.inner + i] = self.grad[(o * so.extent + offsets[k] + e) * so.inner + i];
      accumulate(p, g);
    }
  });
}

Var tanh(const Var& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a) {
  return unary(a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Var abs(const Var& a) {
  return unary(a, "abs", [](double x) { return std::fabs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(const Var& a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var softmax_rows(const Var& a, const std::vector<std::uint8_t>* keep) {
  if (a.value().rank() != 2) throw std::invalid_argument("softmax_rows: expected rank 2, got " + shape_string(a.shape()));
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  if (keep && keep->size() != rows * cols) throw std::invalid_argument("softmax_rows: mask size mismatch");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < cols; ++j)
      if (!keep || (*keep)[i * cols + j]) mx = std::max(mx, a.value().at(i, j));
    if (mx == -INFINITY) throw std::invalid_argument("softmax_rows: row " + std::to_string(i) + " is fully masked");
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      if (keep && !(*keep)[i * cols + j]) continue;
      const double e = std::exp(a.value().at(i, j) - mx);
      out.at(i, j) = e;
      z += e;
    }
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) /= z;
  }
  NodePtr pa = a.node();
  return make(std::move(out), "softmax_rows", {pa}, [pa, rows, cols](Node& self) {
    Tensor g({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += self.grad.at(i, j) * self.value.at(i, j);
      for (std::size_t j = 0; j < cols; ++j) g.at(i, j) = self.value.at(i, j) * (self.grad.at(i, j) - dot);
    }
    accumulate(pa, g);
  });
}

Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps) {
  if (x.value().rank() != 2 || gain.shape() != Shape{x.shape()[1]} || bias.shape() != gain.shape())
    shape_error("layer_norm_rows", x.shape(), gain.shape());
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  Tensor out({rows, cols});
  Tensor xhat({rows, cols});
  std::vector<double> inv_std(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mu += x.value().at(i, j);
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double d = x.value().at(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j) {
      xhat.at(i, j) = (x.value().at(i, j) - mu) * inv_std[i];
      out.at(i, j) = xhat.at(i, j) * gain.value()[j] + bias.value()[j];
    }
  }
  NodePtr px = x.node(), pg = gain.node(), pb = bias.node();
  return make(std::move(out), "layer_norm_rows", {px, pg, pb},
              [px, pg, pb, xhat, inv_std, rows, cols](Node& self) {
                const double n = static_cast<double>(cols);
                if (px->requires_grad) {
                  Tensor g({rows, cols});
                  for (std::size_t i = 0; i < rows; ++i) {
                    double m1 = 0.0, m2 = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) {
                      const double dxh = self.grad.at(i, j) * pg->value[j];
                      m1 += dxh;
                      m2 += dxh * xhat.at(i, j);
                    }
                    m1 /= n;
                    m2 /= n;
                    for (std::size_t j = 0; j < cols; ++j) {
                      const double dxh = self.grad.at(i, j) * pg->value[j];
                      g.at(i, j) = inv_std[i] * (dxh - m1 - xhat.at(i, j) * m2);
                    }
                  }
                  accumulate(px, g);
                }
                if (pg->requires_grad || pb->requires_grad) {
                  Tensor gg({cols}), gb({cols});
                  for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j) {
                      gg[j] += self.grad.at(i, j) * xhat.at(i, j);
                      gb[j] += self.grad.at(i, j);
                    }
                  accumulate(pg, gg);
                  accumulate(pb, gb);
                }
              });
}

Var conv2d(const Var& x, const Var& w, const Var& b, std::size_t stride, std::size_t pad) {
  if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");
  const kernels::ConvGeometry geo{stride, pad};
  Tensor out = kernels::conv2d(x.value(), w.value(), b.value(), geo);
  NodePtr px = x.node(), pw = w.node(), pb = b.node();
  return make(std::move(out), "conv2d", {px, pw, pb}, [px, pw, pb, geo](Node& self) {
    if (px->requires_grad) accumulate(px, kernels::conv2d_grad_input(self.grad, pw->value, px->value.shape(), geo));
    if (pw->requires_grad || pb->requires_grad) {
      Tensor gb;
      Tensor gw = kernels::conv2d_grad_weight(self.grad, px->value, pw->value.shape(), geo, gb);
      accumulate(pw, gw);
      accumulate(pb, gb);
    }
  });
}

Var upsample_nearest2x(const Var& x) {
  if (x.value().rank() != 3) throw std::invalid_argument("upsample_nearest2x: expected [C,H,W], got " + shape_string(x.shape()));
  const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  Tensor out({c, 2 * h, 2 * w});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t xx = 0; xx < 2 * w; ++xx) out.at(k, y, xx) = x.value().at(k, y / 2, xx / 2);
  NodePtr px = x.node();
  return make(std::move(out), "upsample_nearest2x", {px}, [px, c, h, w](Node& self) {
    Tensor g({c, h, w});
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t y = 0; y < 2 * h; ++y)
        for (std::size_t xx = 0; xx < 2 * w; ++xx) g.at(k, y / 2, xx / 2) += self.grad.at(k, y, xx);
    accumulate(px, g);
  });
}

Var avg_pool2x2(const Var& x) {
  if (x.value().rank() != 3 || x.shape()[1] % 2 || x.shape()[2] % 2)
    throw std::invalid_argument("avg_pool2x2: expected [C,H,W] with even H and W, got " + shape_string(x.shape()));
  const std::size_t c = x.shape()[0], h = x.shape()[1] / 2, w = x.shape()[2] / 2;
  Tensor out({c, h, w});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        const auto& v = x.value();
        out.at(k, y, xx) = 0.25 * (v.at(k, 2 * y, 2 * xx) + v.at(k, 2 * y, 2 * xx + 1) +
                                   v.at(k, 2 * y + 1, 2 * xx) + v.at(k, 2 * y + 1, 2 * xx + 1));
      }
  NodePtr px = x.node();
  return make(std::move(out), "avg_pool2x2", {px}, [px, c, h, w](Node& self) {
    Tensor g(px->value.shape());
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t y = 0; y < 2 * h; ++y)
        for (std::size_t xx = 0; xx < 2 * w; ++xx) g.at(k, y, xx) = 0.25 * self.grad.at(k, y / 2, xx / 2);
    accumulate(px, g);
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  NodePtr pa = a.node();
  return make(Tensor({1}, {s}), "sum", {pa}, [pa](Node& self) {
    accumulate(pa, Tensor(pa->value.shape(), self.grad[0]));
  });
}

Var mean(const Var& a) {
  if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
  const double n = static_cast<double>(a.size());
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  NodePtr pa = a.node();
  return make(Tensor({1}, {s / n}), "mean", {pa}, [pa, n](Node& self) {
    accumulate(pa, Tensor(pa->value.shape(), self.grad[0] / n));
  });
}

Var masked_fill(const Var& a, const std::vector<std::uint8_t>& mask, double value) {
  if (mask.size() != a.size()) throw std::invalid_argument("masked_fill: mask size mismatch for " + shape_string(a.shape()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask[i]) out[i] = value;
  NodePtr pa = a.node();
  return make(std::move(out), "masked_fill", {pa}, [pa, mask](Node& self) {
    Tensor g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (mask[i]) g[i] = 0.0;
    accumulate(pa, g);
  });
}

void backward(const Var& root) {
  if (root.size() != 1) throw std::invalid_argument("backward: root must be scalar, got " + shape_string(root.shape()));
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
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

  accumulate(root.node(), Tensor(root.shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

}  // namespace gsf::ad
