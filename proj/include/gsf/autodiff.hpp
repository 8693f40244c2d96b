#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "gsf/tensor.hpp"

// Reverse-mode differentiation over dense row-major tensors.
//
// A Var is a shared handle to a node in the recorded computation. Nodes are
// created by the free functions below; when recording is on and any input
// requires a gradient, the node keeps its parents and a closure that pushes
// its gradient back into them. Calling backward() on a scalar root walks the
// graph in reverse topological order.
namespace gsf::ad {

struct Node {
  Tensor value;
  Tensor grad;  // empty until the first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};

using NodePtr = std::shared_ptr<Node>;

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }

  bool has_grad() const { return !node_->grad.empty(); }
  // Gradient, or zeros when nothing reached this node.
  Tensor grad() const;
  void zero_grad() { node_->grad = Tensor(); }

  double item() const;
  const NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

Var constant(Tensor value);
Var parameter(Tensor value);

// Disables graph recording for its lifetime (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool recording();

// Elementwise, same shape.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// Elementwise product with a constant tensor of the same shape.
Var mul_const(const Var& a, const Tensor& w);
// [rows, cols] + [cols] broadcast over rows.
Var add_row(const Var& x, const Var& row);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);
// Half-open range [begin, end) along `axis`.
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);
Var concat(const std::vector<Var>& parts, std::size_t axis);

Var tanh(const Var& a);
// Subgradient at 0 is 0.
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);

// Row-wise softmax of a rank-2 tensor. Entries with keep[i*cols+j] == 0 are
// excluded from the normalization and come out as exactly 0. Every row must
// keep at least one entry.
Var softmax_rows(const Var& a, const std::vector<std::uint8_t>* keep = nullptr);
Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

// x [Ci,H,W], w [Co,Ci,K,K], b [Co]
Var conv2d(const Var& x, const Var& w, const Var& b, std::size_t stride, std::size_t pad);
Var upsample_nearest2x(const Var& x);
Var avg_pool2x2(const Var& x);

Var sum(const Var& a);
Var mean(const Var& a);
// Entries with mask != 0 are replaced by `value` and receive no gradient.
Var masked_fill(const Var& a, const std::vector<std::uint8_t>& mask, double value);

// Accumulates d(root)/d(node) into every reachable node that requires a gradient.
void backward(const Var& root);

}  // namespace gsf::ad
