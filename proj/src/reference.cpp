#include "qtae/reference.hpp"

namespace qtae::reference {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          const T* b, T beta, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc{0};
      for (std::size_t q = 0; q < k; ++q) {
        const T av = trans_a ? a[q * m + i] : a[i * k + q];
        const T bv = trans_b ? b[j * k + q] : b[q * n + j];
        acc += av * bv;
      }
      c[i * n + j] = alpha * acc + (beta == T{0} ? T{0} : beta * c[i * n + j]);
    }
  }
}

namespace {

// Maps an output tap to an input coordinate; returns false when it lands in zero padding.
bool source_index(long out, long tap, const ConvGeometry& g, long extent, long& in) {
  in = out * static_cast<long>(g.params.stride) + tap - static_cast<long>(g.params.padding);
  if (g.params.mode == PadMode::circular) {
    in %= extent;
    if (in < 0) in += extent;
    return true;
  }
  return in >= 0 && in < extent;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const ConvParams& params) {
  const auto g = conv_geometry(input.shape(), kernel.shape(), params);
  input.require_finite("conv2d input");
  Tensor<T> out({g.batch, g.out_channels, g.out_h, g.out_w});
  const long H = static_cast<long>(g.in_h), W = static_cast<long>(g.in_w), K = static_cast<long>(g.kernel);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oh = 0; oh < g.out_h; ++oh)
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          T acc{0};
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (long kh = 0; kh < K; ++kh)
              for (long kw = 0; kw < K; ++kw) {
                long ih, iw;
                if (!source_index(static_cast<long>(oh), kh, g, H, ih)) continue;
                if (!source_index(static_cast<long>(ow), kw, g, W, iw)) continue;
                acc += kernel[((o * g.in_channels + c) * K + kh) * K + kw] *
                       input[((n * g.in_channels + c) * H + ih) * W + iw];
              }
          out[((n * g.out_channels + o) * g.out_h + oh) * g.out_w + ow] = acc;
        }
  return out;
}

template <typename T>
Tensor<T> conv2d_input_grad(const Tensor<T>& grad_out, const Tensor<T>& kernel, const ConvGeometry& g) {
  Tensor<T> grad_in({g.batch, g.in_channels, g.in_h, g.in_w});
  const long H = static_cast<long>(g.in_h), W = static_cast<long>(g.in_w), K = static_cast<long>(g.kernel);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oh = 0; oh < g.out_h; ++oh)
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          const T go = grad_out[((n * g.out_channels + o) * g.out_h + oh) * g.out_w + ow];
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (long kh = 0; kh < K; ++kh)
              for (long kw = 0; kw < K; ++kw) {
                long ih, iw;
                if (!source_index(static_cast<long>(oh), kh, g, H, ih)) continue;
                if (!source_index(static_cast<long>(ow), kw, g, W, iw)) continue;
                grad_in[((n * g.in_channels + c) * H + ih) * W + iw] +=
                    kernel[((o * g.in_channels + c) * K + kh) * K + kw] * go;
              }
        }
  return grad_in;
}

template <typename T>
Tensor<T> conv2d_kernel_grad(const Tensor<T>& input, const Tensor<T>& grad_out, const ConvGeometry& g) {
  Tensor<T> grad_k({g.out_channels, g.in_channels, g.kernel, g.kernel});
  const long H = static_cast<long>(g.in_h), W = static_cast<long>(g.in_w), K = static_cast<long>(g.kernel);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oh = 0; oh < g.out_h; ++oh)
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          const T go = grad_out[((n * g.out_channels + o) * g.out_h + oh) * g.out_w + ow];
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (long kh = 0; kh < K; ++kh)
              for (long kw = 0; kw < K; ++kw) {
                long ih, iw;
                if (!source_index(static_cast<long>(oh), kh, g, H, ih)) continue;
                if (!source_index(static_cast<long>(ow), kw, g, W, iw)) continue;
                grad_k[((o * g.in_channels + c) * K + kh) * K + kw] +=
                    input[((n * g.in_channels + c) * H + ih) * W + iw] * go;
              }
        }
  return grad_k;
}

template <typename T>
Tensor<T> deconv2d(const Tensor<T>& input, const Tensor<T>& kernel, const ConvParams& params) {
  return conv2d_input_grad(input, kernel, deconv_geometry(input.shape(), kernel.shape(), params));
}

#define QTAE_INSTANTIATE(T)                                                                              \
  template void gemm<T>(bool, bool, std::size_t, std::size_t, std::size_t, T, const T*, const T*, T, T*); \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const ConvParams&);                      \
  template Tensor<T> conv2d_input_grad(const Tensor<T>&, const Tensor<T>&, const ConvGeometry&);         \
  template Tensor<T> conv2d_kernel_grad(const Tensor<T>&, const Tensor<T>&, const ConvGeometry&);        \
  template Tensor<T> deconv2d(const Tensor<T>&, const Tensor<T>&, const ConvParams&);

QTAE_INSTANTIATE(float)
QTAE_INSTANTIATE(double)
#undef QTAE_INSTANTIATE

}  // namespace qtae::reference
