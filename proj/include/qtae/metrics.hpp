#pragma once

#include <cstddef>

#include "qtae/image.hpp"

namespace qtae {

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  std::size_t samples = 0;
};

inline constexpr double kPsnrCap = 120.0;

/// 10 log10(peak^2 / MSE), capped at kPsnrCap when MSE < 1e-12.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1, mean over valid window positions, averaged over channels.
double ssim(const Image& a, const Image& b);

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

}  // namespace qtae
