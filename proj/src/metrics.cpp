#include "qtae/metrics.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace qtae {

namespace {

void check_pair(const Image& a, const Image& b, const char* what) {
  require(a.shape() == b.shape(), std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  require(a.rank() == 3, std::string(what) + ": expected [C,H,W] images");
}

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> g{};
  const double c = (kSsimWindow - 1) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Valid-mode separable filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w,
                                 const std::array<double, kSsimWindow>& g) {
  const std::size_t oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) s += g[k] * src[y * w + x + k];
      rows[y * ow + x] = s;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) s += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b, double peak) {
  check_pair(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.numel());
  if (mse < 1e-12) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Image& a, const Image& b) {
  check_pair(a, b, "ssim");
  const std::size_t C = a.dim(0), H = a.dim(1), W = a.dim(2);
  require(H >= kSsimWindow && W >= kSsimWindow, "ssim: image smaller than the 11x11 window");
  static const auto g = gaussian_taps();
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t ch = 0; ch < C; ++ch) {
    std::vector<double> x(H * W), y(H * W), xx(H * W), yy(H * W), xy(H * W);
    for (std::size_t i = 0; i < H * W; ++i) {
      x[i] = a[ch * H * W + i];
      y[i] = b[ch * H * W + i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, H, W, g), my = filter_valid(y, H, W, g);
    const auto sxx = filter_valid(xx, H, W, g), syy = filter_valid(yy, H, W, g), sxy = filter_valid(xy, H, W, g);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
      sum += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(C);
}

}  // namespace qtae
