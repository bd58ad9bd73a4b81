#include "qtae/kernels.hpp"

#include <Eigen/Core>
#include <cmath>

namespace qtae {

const char* to_string(PadMode mode) { return mode == PadMode::zero ? "zero" : "circular"; }

PadMode pad_mode_from_string(const std::string& name) {
  if (name == "zero") return PadMode::zero;
  if (name == "circular") return PadMode::circular;
  throw ContractError("unknown padding mode '" + name + "'");
}

ConvGeometry conv_geometry(const Shape& input, const Shape& kernel, const ConvParams& params) {
  require(input.size() == 4, "conv2d: input must be NCHW, got " + shape_str(input));
  require(kernel.size() == 4, "conv2d: kernel must be OIKK, got " + shape_str(kernel));
  require(kernel[2] == kernel[3], "conv2d: kernel must be square");
  require(input[1] == kernel[1], "conv2d: input has " + std::to_string(input[1]) +
                                     " channels, kernel expects " + std::to_string(kernel[1]));
  require(params.stride >= 1, "conv2d: stride must be positive");
  const std::size_t k = kernel[2];
  require(input[2] + 2 * params.padding >= k && input[3] + 2 * params.padding >= k,
          "conv2d: kernel larger than padded input");
  if (params.mode == PadMode::circular)
    require(params.padding <= input[2] && params.padding <= input[3], "conv2d: circular padding exceeds input");
  ConvGeometry g{};
  g.batch = input[0];
  g.in_channels = input[1];
  g.out_channels = kernel[0];
  g.kernel = k;
  g.in_h = input[2];
  g.in_w = input[3];
  g.out_h = (g.in_h + 2 * params.padding - k) / params.stride + 1;
  g.out_w = (g.in_w + 2 * params.padding - k) / params.stride + 1;
  g.params = params;
  return g;
}

ConvGeometry deconv_geometry(const Shape& input, const Shape& kernel, const ConvParams& params) {
  require(input.size() == 4, "deconv2d: input must be NCHW, got " + shape_str(input));
  require(kernel.size() == 4, "deconv2d: kernel must be OIKK, got " + shape_str(kernel));
  require(kernel[2] == kernel[3], "deconv2d: kernel must be square");
  require(input[1] == kernel[0], "deconv2d: input has " + std::to_string(input[1]) +
                                     " channels, kernel expects " + std::to_string(kernel[0]));
  require(params.stride >= 1, "deconv2d: stride must be positive");
  const std::size_t k = kernel[2];
  const auto full_h = (input[2] - 1) * params.stride + k;
  const auto full_w = (input[3] - 1) * params.stride + k;
  require(full_h > 2 * params.padding && full_w > 2 * params.padding, "deconv2d: padding too large");
  ConvGeometry g{};
  g.batch = input[0];
  g.in_channels = kernel[1];
  g.out_channels = kernel[0];
  g.kernel = k;
  g.in_h = full_h - 2 * params.padding;
  g.in_w = full_w - 2 * params.padding;
  g.out_h = input[2];
  g.out_w = input[3];
  g.params = params;
  return g;
}

namespace kernels {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
          const T* b, T beta, T* c) {
  using Map = Eigen::Map<const RowMat<T>>;
  const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n), K = static_cast<Eigen::Index>(k);
  Eigen::Map<RowMat<T>> cm(c, M, N);
  if (beta == T{0})
    cm.setZero();
  else if (beta != T{1})
    cm *= beta;
  if (!trans_a && !trans_b)
    cm.noalias() += alpha * (Map(a, M, K) * Map(b, K, N));
  else if (trans_a && !trans_b)
    cm.noalias() += alpha * (Map(a, K, M).transpose() * Map(b, K, N));
  else if (!trans_a && trans_b)
    cm.noalias() += alpha * (Map(a, M, K) * Map(b, N, K).transpose());
  else
    cm.noalias() += alpha * (Map(a, K, M).transpose() * Map(b, N, K).transpose());
}

namespace {

inline long wrap(long i, long n) {
  long r = i % n;
  return r < 0 ? r + n : r;
}

// cols[(c*K+kh)*K+kw][n*P + oh*Wo + ow] = x[n][c][oh*s+kh-p][ow*s+kw-p]
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const long K = static_cast<long>(g.kernel), s = static_cast<long>(g.params.stride),
             p = static_cast<long>(g.params.padding);
  const long H = static_cast<long>(g.in_h), W = static_cast<long>(g.in_w);
  const long Ho = static_cast<long>(g.out_h), Wo = static_cast<long>(g.out_w);
  const long P = Ho * Wo, NP = static_cast<long>(g.batch) * P;
  const long rows = static_cast<long>(g.in_channels) * K * K;
  const bool circ = g.params.mode == PadMode::circular;
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    const long c = r / (K * K), kh = (r / K) % K, kw = r % K;
    T* dst = cols + r * NP;
    for (long n = 0; n < static_cast<long>(g.batch); ++n) {
      const T* src = x + (n * static_cast<long>(g.in_channels) + c) * H * W;
      T* d = dst + n * P;
      for (long oh = 0; oh < Ho; ++oh) {
        long ih = oh * s + kh - p;
        if (circ)
          ih = wrap(ih, H);
        else if (ih < 0 || ih >= H) {
          for (long ow = 0; ow < Wo; ++ow) d[oh * Wo + ow] = T{0};
          continue;
        }
        const T* row = src + ih * W;
        for (long ow = 0; ow < Wo; ++ow) {
          long iw = ow * s + kw - p;
          if (circ)
            d[oh * Wo + ow] = row[wrap(iw, W)];
          else
            d[oh * Wo + ow] = (iw >= 0 && iw < W) ? row[iw] : T{0};
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the image. Parallel over channels.
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* x) {
  const long K = static_cast<long>(g.kernel), s = static_cast<long>(g.params.stride),
             p = static_cast<long>(g.params.padding);
  const long H = static_cast<long>(g.in_h), W = static_cast<long>(g.in_w);
  const long Ho = static_cast<long>(g.out_h), Wo = static_cast<long>(g.out_w);
  const long P = Ho * Wo, NP = static_cast<long>(g.batch) * P;
  const long C = static_cast<long>(g.in_channels);
  const bool circ = g.params.mode == PadMode::circular;
#pragma omp parallel for schedule(static)
  for (long c = 0; c < C; ++c) {
    for (long kh = 0; kh < K; ++kh) {
      for (long kw = 0; kw < K; ++kw) {
        const T* src = cols + ((c * K + kh) * K + kw) * NP;
        for (long n = 0; n < static_cast<long>(g.batch); ++n) {
          T* img = x + (n * C + c) * H * W;
          const T* sp = src + n * P;
          for (long oh = 0; oh < Ho; ++oh) {
            long ih = oh * s + kh - p;
            if (circ)
              ih = wrap(ih, H);
            else if (ih < 0 || ih >= H)
              continue;
            T* row = img + ih * W;
            for (long ow = 0; ow < Wo; ++ow) {
              long iw = ow * s + kw - p;
              if (circ)
                row[wrap(iw, W)] += sp[oh * Wo + ow];
              else if (iw >= 0 && iw < W)
                row[iw] += sp[oh * Wo + ow];
            }
          }
        }
      }
    }
  }
}

// [N][O][P] <-> [O][N*P]
template <typename T>
void nop_to_onp(const T* src, std::size_t batch, std::size_t channels, std::size_t plane, T* dst) {
  const long N = static_cast<long>(batch), O = static_cast<long>(channels), P = static_cast<long>(plane);
#pragma omp parallel for schedule(static)
  for (long o = 0; o < O; ++o)
    for (long n = 0; n < N; ++n)
      for (long q = 0; q < P; ++q) dst[(o * N + n) * P + q] = src[(n * O + o) * P + q];
}

template <typename T>
void onp_to_nop(const T* src, std::size_t batch, std::size_t channels, std::size_t plane, T* dst) {
  const long N = static_cast<long>(batch), O = static_cast<long>(channels), P = static_cast<long>(plane);
#pragma omp parallel for schedule(static)
  for (long o = 0; o < O; ++o)
    for (long n = 0; n < N; ++n)
      for (long q = 0; q < P; ++q) dst[(n * O + o) * P + q] = src[(o * N + n) * P + q];
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* where) {
  t.require_finite(where);
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const ConvParams& params) {
  const auto g = conv_geometry(input.shape(), kernel.shape(), params);
  check_finite(input, "conv2d input");
  const std::size_t rows = g.in_channels * g.kernel * g.kernel;
  const std::size_t plane = g.out_h * g.out_w, np = g.batch * plane;
  std::vector<T> cols(rows * np);
  im2col(input.ptr(), g, cols.data());
  std::vector<T> tmp(g.out_channels * np);
  gemm<T>(false, false, g.out_channels, np, rows, T{1}, kernel.ptr(), cols.data(), T{0}, tmp.data());
  Tensor<T> out({g.batch, g.out_channels, g.out_h, g.out_w});
  onp_to_nop(tmp.data(), g.batch, g.out_channels, plane, out.ptr());
  return out;
}

template <typename T>
Tensor<T> conv2d_input_grad(const Tensor<T>& grad_out, const Tensor<T>& kernel, const ConvGeometry& g) {
  require(grad_out.shape() == Shape({g.batch, g.out_channels, g.out_h, g.out_w}),
          "conv2d_input_grad: gradient shape " + shape_str(grad_out.shape()) + " does not match geometry");
  require(kernel.shape() == Shape({g.out_channels, g.in_channels, g.kernel, g.kernel}),
          "conv2d_input_grad: kernel shape mismatch");
  check_finite(grad_out, "transposed convolution input");
  const std::size_t rows = g.in_channels * g.kernel * g.kernel;
  const std::size_t plane = g.out_h * g.out_w, np = g.batch * plane;
  std::vector<T> tmp(g.out_channels * np);
  nop_to_onp(grad_out.ptr(), g.batch, g.out_channels, plane, tmp.data());
  std::vector<T> cols(rows * np);
  gemm<T>(true, false, rows, np, g.out_channels, T{1}, kernel.ptr(), tmp.data(), T{0}, cols.data());
  Tensor<T> grad_in({g.batch, g.in_channels, g.in_h, g.in_w});
  col2im(cols.data(), g, grad_in.ptr());
  return grad_in;
}

template <typename T>
Tensor<T> conv2d_kernel_grad(const Tensor<T>& input, const Tensor<T>& grad_out, const ConvGeometry& g) {
  require(input.shape() == Shape({g.batch, g.in_channels, g.in_h, g.in_w}), "conv2d_kernel_grad: input shape mismatch");
  require(grad_out.shape() == Shape({g.batch, g.out_channels, g.out_h, g.out_w}),
          "conv2d_kernel_grad: gradient shape mismatch");
  const std::size_t rows = g.in_channels * g.kernel * g.kernel;
  const std::size_t plane = g.out_h * g.out_w, np = g.batch * plane;
  std::vector<T> cols(rows * np);
  im2col(input.ptr(), g, cols.data());
  std::vector<T> tmp(g.out_channels * np);
  nop_to_onp(grad_out.ptr(), g.batch, g.out_channels, plane, tmp.data());
  Tensor<T> grad_k({g.out_channels, g.in_channels, g.kernel, g.kernel});
  gemm<T>(false, true, g.out_channels, rows, np, T{1}, tmp.data(), cols.data(), T{0}, grad_k.ptr());
  return grad_k;
}

template <typename T>
Tensor<T> deconv2d(const Tensor<T>& input, const Tensor<T>& kernel, const ConvParams& params) {
  const auto g = deconv_geometry(input.shape(), kernel.shape(), params);
  return conv2d_input_grad(input, kernel, g);
}

template <typename T>
void add_channel_bias(Tensor<T>& x, const Tensor<T>& bias) {
  require(x.rank() >= 2 && bias.numel() == x.dim(1), "add_channel_bias: bias length must equal channel count");
  const long N = static_cast<long>(x.dim(0)), C = static_cast<long>(x.dim(1));
  const long P = static_cast<long>(x.numel()) / (N * C);
  T* d = x.ptr();
  const T* b = bias.ptr();
#pragma omp parallel for schedule(static)
  for (long nc = 0; nc < N * C; ++nc) {
    const T v = b[nc % C];
    T* row = d + nc * P;
    for (long q = 0; q < P; ++q) row[q] += v;
  }
}

template <typename T>
Tensor<T> channel_sum(const Tensor<T>& g) {
  const std::size_t N = g.dim(0), C = g.dim(1), P = g.numel() / (N * C);
  Tensor<T> out({C});
  // fixed reduction order: n outer, q inner
  for (std::size_t c = 0; c < C; ++c) {
    T acc{0};
    for (std::size_t n = 0; n < N; ++n) {
      const T* row = g.ptr() + (n * C + c) * P;
      for (std::size_t q = 0; q < P; ++q) acc += row[q];
    }
    out[c] = acc;
  }
  return out;
}

template <typename T>
void relu_inplace(Tensor<T>& x) {
  T* d = x.ptr();
  const long n = static_cast<long>(x.numel());
#pragma omp parallel for simd schedule(static)
  for (long i = 0; i < n; ++i) d[i] = d[i] > T{0} ? d[i] : T{0};
}

template <typename T>
void sigmoid_inplace(Tensor<T>& x) {
  T* d = x.ptr();
  const long n = static_cast<long>(x.numel());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) d[i] = T{1} / (T{1} + std::exp(-d[i]));
}

#define QTAE_INSTANTIATE(T)                                                                              \
  template void gemm<T>(bool, bool, std::size_t, std::size_t, std::size_t, T, const T*, const T*, T, T*); \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const ConvParams&);                      \
  template Tensor<T> conv2d_input_grad(const Tensor<T>&, const Tensor<T>&, const ConvGeometry&);         \
  template Tensor<T> conv2d_kernel_grad(const Tensor<T>&, const Tensor<T>&, const ConvGeometry&);        \
  template Tensor<T> deconv2d(const Tensor<T>&, const Tensor<T>&, const ConvParams&);                    \
  template void add_channel_bias(Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> channel_sum(const Tensor<T>&);                                                      \
  template void relu_inplace(Tensor<T>&);                                                                \
  template void sigmoid_inplace(Tensor<T>&);

QTAE_INSTANTIATE(float)
QTAE_INSTANTIATE(double)
#undef QTAE_INSTANTIATE

}  // namespace kernels
}  // namespace qtae
