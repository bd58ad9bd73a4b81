#pragma once

#include <cstdint>
#include <vector>

#include "qtae/autograd.hpp"

namespace qtae {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamHyper&) const = default;
};

/// First/second moment estimates for an ordered parameter list.
template <typename T>
struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;

  AdamState() = default;
  AdamState(const std::vector<Var<T>>& params, AdamHyper h);
};

/// One bias-corrected Adam update of `params` using their accumulated gradients.
/// A parameter without a gradient is treated as having a zero gradient.
/// Throws NumericError, leaving every parameter and the state untouched,
/// if any gradient is non-finite.
template <typename T>
void adam_step(std::vector<Var<T>>& params, AdamState<T>& state);

/// Explicit-gradient overload used where gradients do not live on the parameters.
template <typename T>
void adam_step(std::vector<Tensor<T>*> params, const std::vector<const Tensor<T>*>& grads, AdamState<T>& state);

}  // namespace qtae
