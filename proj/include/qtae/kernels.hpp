#pragma once

// Data-parallel compute kernels. Matrix products go through Eigen; the
// surrounding gather/scatter and elementwise loops are OpenMP-parallel.
// Every kernel has a serial counterpart in reference.hpp used by the tests.

#include <cstddef>

#include "qtae/tensor.hpp"

namespace qtae {

enum class PadMode { zero, circular };

const char* to_string(PadMode mode);
PadMode pad_mode_from_string(const std::string& name);

struct ConvParams {
  std::size_t stride = 1;
  std::size_t padding = 0;
  PadMode mode = PadMode::zero;
};

/// Spatial geometry of one convolution: input (H,W) to output (Ho,Wo).
struct ConvGeometry {
  std::size_t batch, in_channels, out_channels, kernel;
  std::size_t in_h, in_w, out_h, out_w;
  ConvParams params;
};

/// Output extents of conv2d(input NCHW, kernel OIKK). Throws on mismatch.
ConvGeometry conv_geometry(const Shape& input, const Shape& kernel, const ConvParams& params);
/// Geometry of the conv2d whose adjoint deconv2d(input, kernel) computes.
/// deconv output extent is (H-1)*stride - 2*padding + K.
ConvGeometry deconv_geometry(const Shape& input, const Shape& kernel, const ConvParams& params);

namespace kernels {

/// Row-major C = alpha * op(A) * op(B) + beta * C, op(A) is M x K, op(B) is K x N.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, const T* b, T beta, T* c);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const ConvParams& params);

/// Adjoint of conv2d with respect to its input, i.e. the transposed convolution.
/// `g` holds the geometry of the forward convolution.
template <typename T>
Tensor<T> conv2d_input_grad(const Tensor<T>& grad_out, const Tensor<T>& kernel, const ConvGeometry& g);

template <typename T>
Tensor<T> conv2d_kernel_grad(const Tensor<T>& input, const Tensor<T>& grad_out, const ConvGeometry& g);

template <typename T>
Tensor<T> deconv2d(const Tensor<T>& input, const Tensor<T>& kernel, const ConvParams& params);

/// y[n,c,:,:] += bias[c]
template <typename T>
void add_channel_bias(Tensor<T>& x, const Tensor<T>& bias);

/// sum over n,h,w of g[n,c,h,w]
template <typename T>
Tensor<T> channel_sum(const Tensor<T>& g);

template <typename T>
void relu_inplace(Tensor<T>& x);

template <typename T>
void sigmoid_inplace(Tensor<T>& x);

}  // namespace kernels
}  // namespace qtae
