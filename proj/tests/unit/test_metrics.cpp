#include <gtest/gtest.h>

#include <cmath>

#include "qtae/metrics.hpp"
#include "support.hpp"

using namespace qtae;

namespace {

double oracle_psnr(const Image& a, const Image& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  const double mse = s / double(a.numel());
  return mse < 1e-12 ? 120.0 : 10.0 * std::log10(1.0 / mse);
}

// Full 2-D window applied at each valid position.
double oracle_ssim(const Image& a, const Image& b) {
  const int C = int(a.dim(0)), H = int(a.dim(1)), W = int(a.dim(2)), K = 11, r = 5;
  double w[11][11], total = 0;
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) total += w[i][j] = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / (2 * 1.5 * 1.5));
  const double c1 = 1e-4, c2 = 9e-4;
  double acc = 0;
  for (int c = 0; c < C; ++c) {
    double sum = 0;
    for (int y = 0; y + K <= H; ++y)
      for (int x = 0; x + K <= W; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < K; ++i)
          for (int j = 0; j < K; ++j) {
            const double p = a[(c * H + y + i) * W + x + j], q = b[(c * H + y + i) * W + x + j], g = w[i][j] / total;
            ma += g * p, mb += g * q, saa += g * p * p, sbb += g * q * q, sab += g * p * q;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      }
    acc += sum / ((H - K + 1) * (W - K + 1));
  }
  return acc / C;
}

}  // namespace

TEST(Psnr, Anchors) {
  Image z({1, 8, 8}, 0.0f), o({1, 8, 8}, 1.0f);
  EXPECT_EQ(psnr(z, z), 120.0);
  EXPECT_EQ(psnr(z, o), 0.0);
  // alternating +-0.1 gives MSE 0.01
  Image base({1, 10, 10}, 0.5f), noisy = base;
  for (std::size_t i = 0; i < 100; ++i) noisy[i] = i % 2 ? 0.6f : 0.4f;
  EXPECT_NEAR(psnr(base, noisy), 20.0, 1e-5);
  EXPECT_THROW(psnr(z, Image({1, 8, 7})), ContractError);
}

TEST(Ssim, Anchors) {
  std::mt19937_64 rng(1);
  const auto a = test::uniform({3, 16, 16}, rng);
  EXPECT_EQ(ssim(a, a), 1.0);
  Image z({1, 12, 12}, 0.0f), o({1, 12, 12}, 1.0f);
  EXPECT_EQ(ssim(z, z), 1.0);
  EXPECT_NEAR(ssim(z, o), 1e-4 / (1 + 1e-4), 1e-12);
  EXPECT_THROW(ssim(Image({1, 10, 10}), Image({1, 10, 10})), ContractError);
  EXPECT_THROW(ssim(z, Image({1, 12, 13})), ContractError);
}

TEST(Metrics, MatchDirectOracles) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t c = t % 4 == 0 ? 3 : 1, h = test::pick(rng, 11, 20), w = test::pick(rng, 11, 20);
    const auto a = test::uniform({c, h, w}, rng);
    auto b = a;
    const double amp = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
    for (auto& v : b.storage()) v = std::clamp(v + float(amp * std::normal_distribution<double>()(rng)), 0.0f, 1.0f);
    ASSERT_NEAR(psnr(a, b), oracle_psnr(a, b), 1e-6);
    ASSERT_NEAR(ssim(a, b), oracle_ssim(a, b), 1e-6);
  }
}

TEST(Metrics, SymmetryAndRange) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto a = test::uniform({1, 16, 16}, rng), b = test::uniform({1, 16, 16}, rng);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-9);
    EXPECT_GE(ssim(a, b), -1.0);
    EXPECT_LE(ssim(a, b), 1.0);
    EXPECT_GE(psnr(a, b), 0.0);
  }
}

TEST(Psnr, MonotoneInNoiseAmplitude) {
  std::mt19937_64 rng(4);
  const auto a = test::uniform({1, 32, 32}, rng, 0.3, 0.7);
  const auto noise = test::normal({1, 32, 32}, rng);
  double prev = 200.0;
  for (double amp : {0.001, 0.01, 0.03, 0.1, 0.2}) {
    auto b = a;
    for (std::size_t i = 0; i < b.numel(); ++i) b[i] += float(amp * noise[i]);
    const double p = psnr(a, b);
    EXPECT_LT(p, prev);
    prev = p;
  }
}
