#include "qtae/autograd.hpp"

#include <cmath>
#include <unordered_set>

namespace qtae {

template <typename T>
void Node<T>::accumulate(const Tensor<T>& g) {
  if (grad.empty()) {
    grad = g;
    return;
  }
  require(grad.numel() == g.numel(), "gradient shape mismatch during accumulation");
  T* d = grad.ptr();
  const T* s = g.ptr();
  const long n = static_cast<long>(g.numel());
#pragma omp parallel for simd schedule(static)
  for (long i = 0; i < n; ++i) d[i] += s[i];
}

template <typename T>
Var<T>::Var(Tensor<T> value, bool requires_grad) : node_(std::make_shared<Node<T>>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

template <typename T>
void backward(const Var<T>& root) {
  require(static_cast<bool>(root), "backward: empty variable");
  require(root.value().numel() == 1, "backward: root must be a scalar, got " + shape_str(root.shape()));
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Tensor<T>(root.shape(), T{1}));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(node->grad);
  }
}

namespace ag {
namespace {

template <typename T>
std::shared_ptr<Node<T>> make_node(Tensor<T> value, std::vector<std::shared_ptr<Node<T>>> parents) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  for (const auto& p : parents) node->requires_grad = node->requires_grad || p->requires_grad;
  if (node->requires_grad) node->parents = std::move(parents);
  return node;
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& kernel, const ConvParams& params) {
  const auto g = conv_geometry(x.shape(), kernel.shape(), params);
  auto out = make_node(kernels::conv2d(x.value(), kernel.value(), params), {x.node(), kernel.node()});
  if (out->requires_grad) {
    out->backward_fn = [xn = x.node(), kn = kernel.node(), g](const Tensor<T>& gout) {
      if (xn->requires_grad) xn->accumulate(kernels::conv2d_input_grad(gout, kn->value, g));
      if (kn->requires_grad) kn->accumulate(kernels::conv2d_kernel_grad(xn->value, gout, g));
    };
  }
  return Var<T>(out);
}

template <typename T>
Var<T> deconv2d(const Var<T>& x, const Var<T>& kernel, const ConvParams& params) {
  const auto g = deconv_geometry(x.shape(), kernel.shape(), params);
  auto out = make_node(kernels::conv2d_input_grad(x.value(), kernel.value(), g), {x.node(), kernel.node()});
  if (out->requires_grad) {
    out->backward_fn = [xn = x.node(), kn = kernel.node(), g](const Tensor<T>& gout) {
      if (xn->requires_grad) xn->accumulate(kernels::conv2d(gout, kn->value, g.params));
      if (kn->requires_grad) kn->accumulate(kernels::conv2d_kernel_grad(gout, xn->value, g));
    };
  }
  return Var<T>(out);
}

template <typename T>
Var<T> add_channel_bias(const Var<T>& x, const Var<T>& bias) {
  Tensor<T> v = x.value();
  kernels::add_channel_bias(v, bias.value());
  auto out = make_node(std::move(v), {x.node(), bias.node()});
  if (out->requires_grad) {
    out->backward_fn = [xn = x.node(), bn = bias.node()](const Tensor<T>& gout) {
      if (xn->requires_grad) xn->accumulate(gout);
      if (bn->requires_grad) bn->accumulate(kernels::channel_sum(gout));
    };
  }
  return Var<T>(out);
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> v = x.value();
  kernels::relu_inplace(v);
  auto out = make_node(std::move(v), {x.node()});
  if (out->requires_grad) {
    out->backward_fn = [xn = x.node()](const Tensor<T>& gout) {
      Tensor<T> gin = gout;
      const T* in = xn->value.ptr();
      T* d = gin.ptr();
      const long n = static_cast<long>(gin.numel());
#pragma omp parallel for simd schedule(static)
      for (long i = 0; i < n; ++i) d[i] = in[i] > T{0} ? d[i] : T{0};
      xn->accumulate(gin);
    };
  }
  return Var<T>(out);
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> v = x.value();
  kernels::sigmoid_inplace(v);
  auto out = make_node(std::move(v), {x.node()});
  if (out->requires_grad) {
    out->backward_fn = [xn = x.node(), self = out.get()](const Tensor<T>& gout) {
      Tensor<T> gin = gout;
      const T* s = self->value.ptr();
      T* d = gin.ptr();
      const long n = static_cast<long>(gin.numel());
#pragma omp parallel for simd schedule(static)
      for (long i = 0; i < n; ++i) d[i] *= s[i] * (T{1} - s[i]);
      xn->accumulate(gin);
    };
  }
  return Var<T>(out);
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  require(x.value().rank() == 2, "linear: input must be [N, features], got " + shape_str(x.shape()));
  require(weight.value().rank() == 2 && weight.shape()[1] == x.shape()[1],
          "linear: weight " + shape_str(weight.shape()) + " incompatible with input " + shape_str(x.shape()));
  require(bias.value().numel() == weight.shape()[0], "linear: bias length must equal output features");
  const std::size_t n = x.shape()[0], in = x.shape()[1], outf = weight.shape()[0];
  Tensor<T> v({n, outf});
  kernels::gemm<T>(false, true, n, outf, in, T{1}, x.value().ptr(), weight.value().ptr(), T{0}, v.ptr());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < outf; ++j) v[i * outf + j] += bias.value()[j];
  auto out = make_node(std::move(v), {x.node(), weight.node(), bias.node()});
  if (out->requires_grad) {
    out->backward_fn = [xn = x.node(), wn = weight.node(), bn = bias.node(), n, in, outf](const Tensor<T>& gout) {
      if (xn->requires_grad) {
        Tensor<T> gx({n, in});
        kernels::gemm<T>(false, false, n, in, outf, T{1}, gout.ptr(), wn->value.ptr(), T{0}, gx.ptr());
        xn->accumulate(gx);
      }
      if (wn->requires_grad) {
        Tensor<T> gw({outf, in});
        kernels::gemm<T>(true, false, outf, in, n, T{1}, gout.ptr(), xn->value.ptr(), T{0}, gw.ptr());
        wn->accumulate(gw);
      }
      if (bn->requires_grad) {
        Tensor<T> gb(bn->value.shape());
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < outf; ++j) gb[j] += gout[i * outf + j];
        bn->accumulate(gb);
      }
    };
  }
  return Var<T>(out);
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  auto out = make_node(x.value().reshaped(std::move(shape)), {x.node()});
  if (out->requires_grad) {
    out->backward_fn = [xn = x.node()](const Tensor<T>& gout) { xn->accumulate(gout.reshaped(xn->value.shape())); };
  }
  return Var<T>(out);
}

namespace {

// Moves axis 1 to the end (forward) or the last axis to position 1 (inverse) of a rank-4 tensor.
template <typename T>
Tensor<T> permute_channels(const Tensor<T>& x, bool to_last) {
  require(x.rank() == 4, "channel permutation needs a rank-4 tensor, got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0);
  const std::size_t c = to_last ? x.dim(1) : x.dim(3);
  const std::size_t h = to_last ? x.dim(2) : x.dim(1);
  const std::size_t w = to_last ? x.dim(3) : x.dim(2);
  Tensor<T> out(to_last ? Shape{n, h, w, c} : Shape{n, c, h, w});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          const std::size_t chw = ((b * c + ch) * h + i) * w + j;
          const std::size_t hwc = ((b * h + i) * w + j) * c + ch;
          if (to_last)
            out[hwc] = x[chw];
          else
            out[chw] = x[hwc];
        }
  return out;
}

}  // namespace

template <typename T>
Var<T> to_channels_last(const Var<T>& x) {
  auto out = make_node(permute_channels(x.value(), true), {x.node()});
  if (out->requires_grad)
    out->backward_fn = [xn = x.node()](const Tensor<T>& gout) { xn->accumulate(permute_channels(gout, false)); };
  return Var<T>(out);
}

template <typename T>
Var<T> to_channels_first(const Var<T>& x) {
  auto out = make_node(permute_channels(x.value(), false), {x.node()});
  if (out->requires_grad)
    out->backward_fn = [xn = x.node()](const Tensor<T>& gout) { xn->accumulate(permute_channels(gout, true)); };
  return Var<T>(out);
}

template <typename T>
Var<T> gather(const Var<T>& x, const std::vector<IndexMap>& maps) {
  require(x.value().rank() == 2, "gather: input must be [N, cells], got " + shape_str(x.shape()));
  const std::size_t n = x.shape()[0], cells = x.shape()[1];
  require(!maps.empty() && (maps.size() == 1 || maps.size() == n), "gather: need one shared map or one per sample");
  const std::size_t out_cells = maps.front().size();
  for (const auto& m : maps) {
    require(m.size() == out_cells, "gather: maps must have equal length");
    for (auto idx : m) require(idx < static_cast<std::int32_t>(cells), "gather: index out of range");
  }
  Tensor<T> v({n, out_cells});
  for (std::size_t b = 0; b < n; ++b) {
    const IndexMap& m = maps.size() == 1 ? maps[0] : maps[b];
    const T* src = x.value().ptr() + b * cells;
    T* dst = v.ptr() + b * out_cells;
    for (std::size_t j = 0; j < out_cells; ++j) dst[j] = m[j] < 0 ? T{0} : src[m[j]];
  }
  auto out = make_node(std::move(v), {x.node()});
  if (out->requires_grad) {
    out->backward_fn = [xn = x.node(), maps, n, cells, out_cells](const Tensor<T>& gout) {
      Tensor<T> gin({n, cells});
      for (std::size_t b = 0; b < n; ++b) {
        const IndexMap& m = maps.size() == 1 ? maps[0] : maps[b];
        const T* g = gout.ptr() + b * out_cells;
        T* d = gin.ptr() + b * cells;
        for (std::size_t j = 0; j < out_cells; ++j)
          if (m[j] >= 0) d[m[j]] += g[j];
      }
      xn->accumulate(gin);
    };
  }
  return Var<T>(out);
}

template <typename T>
Var<T> add_constant(const Var<T>& x, const Tensor<T>& c) {
  require(x.value().numel() == c.numel(), "add_constant: shape mismatch");
  Tensor<T> v = x.value();
  for (std::size_t i = 0; i < v.numel(); ++i) v[i] += c[i];
  auto out = make_node(std::move(v), {x.node()});
  if (out->requires_grad) out->backward_fn = [xn = x.node()](const Tensor<T>& gout) { xn->accumulate(gout); };
  return Var<T>(out);
}

template <typename T>
Var<T> l1_loss(const Var<T>& prediction, const Tensor<T>& target) {
  require(prediction.shape() == target.shape(), "l1_loss: prediction " + shape_str(prediction.shape()) +
                                                    " vs target " + shape_str(target.shape()));
  const auto& p = prediction.value();
  const std::size_t count = p.numel();
  T acc{0};
  for (std::size_t i = 0; i < count; ++i) acc += std::abs(p[i] - target[i]);
  Tensor<T> v({1}, acc / static_cast<T>(count));
  v.require_finite("l1_loss");
  auto out = make_node(std::move(v), {prediction.node()});
  if (out->requires_grad) {
    out->backward_fn = [pn = prediction.node(), target, count](const Tensor<T>& gout) {
      const T scale = gout[0] / static_cast<T>(count);
      Tensor<T> gin(pn->value.shape());
      const T* pv = pn->value.ptr();
      for (std::size_t i = 0; i < count; ++i) {
        const T d = pv[i] - target[i];
        gin[i] = d > T{0} ? scale : (d < T{0} ? -scale : T{0});
      }
      pn->accumulate(gin);
    };
  }
  return Var<T>(out);
}

template <typename T>
Var<T> inner(const Var<T>& x, const Tensor<T>& r) {
  require(x.value().numel() == r.numel(), "inner: size mismatch");
  auto out = make_node(Tensor<T>({1}, dot(x.value(), r)), {x.node()});
  if (out->requires_grad) {
    out->backward_fn = [xn = x.node(), r](const Tensor<T>& gout) {
      Tensor<T> gin = r;
      gin.reshape(xn->value.shape());
      for (std::size_t i = 0; i < gin.numel(); ++i) gin[i] *= gout[0];
      xn->accumulate(gin);
    };
  }
  return Var<T>(out);
}

#define QTAE_INSTANTIATE(T)                                                    \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const ConvParams&);   \
  template Var<T> deconv2d(const Var<T>&, const Var<T>&, const ConvParams&); \
  template Var<T> add_channel_bias(const Var<T>&, const Var<T>&);            \
  template Var<T> relu(const Var<T>&);                                       \
  template Var<T> sigmoid(const Var<T>&);                                    \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);       \
  template Var<T> reshape(const Var<T>&, Shape);                             \
  template Var<T> to_channels_last(const Var<T>&);                           \
  template Var<T> to_channels_first(const Var<T>&);                          \
  template Var<T> gather(const Var<T>&, const std::vector<IndexMap>&);       \
  template Var<T> add_constant(const Var<T>&, const Tensor<T>&);             \
  template Var<T> l1_loss(const Var<T>&, const Tensor<T>&);                  \
  template Var<T> inner(const Var<T>&, const Tensor<T>&);

QTAE_INSTANTIATE(float)
QTAE_INSTANTIATE(double)
#undef QTAE_INSTANTIATE
}  // namespace ag

template struct Node<float>;
template struct Node<double>;
template class Var<float>;
template class Var<double>;
template void backward(const Var<float>&);
template void backward(const Var<double>&);

}  // namespace qtae
