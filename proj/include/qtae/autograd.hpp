#pragma once

// Reverse-mode differentiation over a dynamically recorded graph.
//
// Each op produces a Var whose node keeps its parents and a closure that
// pushes the output gradient back into them. backward() walks the graph in
// reverse topological order. Graphs are single-threaded; the kernels they
// call may use OpenMP internally.

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "qtae/kernels.hpp"
#include "qtae/tensor.hpp"

namespace qtae {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Tensor<T>&)> backward_fn;

  /// grad += g, allocating on first use.
  void accumulate(const Tensor<T>& g);
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad = Tensor<T>(); }
  const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Seeds d(root)/d(root) = 1 and accumulates gradients into every leaf that requires them.
/// root must hold exactly one element.
template <typename T>
void backward(const Var<T>& root);

/// Per-sample gather: out[n][j] = in[n][map[j]], or 0 where map[j] < 0.
using IndexMap = std::vector<std::int32_t>;

namespace ag {

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& kernel, const ConvParams& params);

/// Transposed convolution; kernel is [in_channels, out_channels, K, K].
template <typename T>
Var<T> deconv2d(const Var<T>& x, const Var<T>& kernel, const ConvParams& params);

template <typename T>
Var<T> add_channel_bias(const Var<T>& x, const Var<T>& bias);

template <typename T>
Var<T> relu(const Var<T>& x);

template <typename T>
Var<T> sigmoid(const Var<T>& x);

/// x [N, in] -> x W^T + b, W [out, in], b [out].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);

/// [N, C, H, W] -> [N, H, W, C]
template <typename T>
Var<T> to_channels_last(const Var<T>& x);

/// [N, H, W, C] -> [N, C, H, W]
template <typename T>
Var<T> to_channels_first(const Var<T>& x);

/// x is [N, cells]; maps has either one entry (shared) or N entries. Output is [N, map size].
template <typename T>
Var<T> gather(const Var<T>& x, const std::vector<IndexMap>& maps);

/// x + c for a constant tensor c of the same shape.
template <typename T>
Var<T> add_constant(const Var<T>& x, const Tensor<T>& c);

/// Mean absolute difference. Subgradient at ties is 0.
template <typename T>
Var<T> l1_loss(const Var<T>& prediction, const Tensor<T>& target);

/// Scalar sum_i x_i * r_i for a constant r.
template <typename T>
Var<T> inner(const Var<T>& x, const Tensor<T>& r);

}  // namespace ag
}  // namespace qtae
