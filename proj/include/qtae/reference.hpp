#pragma once

// Serial direct-loop implementations of the kernels in kernels.hpp.
// Slow and obviously correct; tests and the benchmark compare against them.

#include "qtae/kernels.hpp"

namespace qtae::reference {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          const T* b, T beta, T* c);

/// out[n,o,oh,ow] = sum_{c,kh,kw} k[o,c,kh,kw] * x[n,c,oh*s+kh-p,ow*s+kw-p]
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const ConvParams& params);

template <typename T>
Tensor<T> conv2d_input_grad(const Tensor<T>& grad_out, const Tensor<T>& kernel, const ConvGeometry& g);

template <typename T>
Tensor<T> conv2d_kernel_grad(const Tensor<T>& input, const Tensor<T>& grad_out, const ConvGeometry& g);

template <typename T>
Tensor<T> deconv2d(const Tensor<T>& input, const Tensor<T>& kernel, const ConvParams& params);

}  // namespace qtae::reference
