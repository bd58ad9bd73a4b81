#pragma once

#include <cstdint>
#include <random>

#include "qtae/tensor.hpp"

namespace qtae::test {

template <typename T = float>
Tensor<T> normal(Shape shape, std::mt19937_64& rng, double sd = 1.0) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> d(0.0, sd);
  for (auto& v : t.storage()) v = static_cast<T>(d(rng));
  return t;
}

template <typename T = float>
Tensor<T> uniform(Shape shape, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.storage()) v = static_cast<T>(d(rng));
  return t;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

}  // namespace qtae::test
