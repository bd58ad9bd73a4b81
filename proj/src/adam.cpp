#include "qtae/adam.hpp"

#include <cmath>

namespace qtae {

template <typename T>
AdamState<T>::AdamState(const std::vector<Var<T>>& params, AdamHyper h) : hyper(h) {
  for (const auto& p : params) {
    m.emplace_back(p.shape());
    v.emplace_back(p.shape());
  }
}

template <typename T>
void adam_step(std::vector<Tensor<T>*> params, const std::vector<const Tensor<T>*>& grads, AdamState<T>& state) {
  require(params.size() == grads.size(), "adam_step: parameter/gradient count mismatch");
  require(params.size() == state.m.size() && params.size() == state.v.size(),
          "adam_step: state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(state.m[i].numel() == params[i]->numel(), "adam_step: moment shape mismatch");
    if (grads[i]) {
      require(grads[i]->numel() == params[i]->numel(), "adam_step: gradient shape mismatch");
      if (!grads[i]->all_finite()) throw NumericError("adam_step: non-finite gradient, step refused");
    }
  }

  state.step += 1;
  const double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const T lr = static_cast<T>(state.hyper.lr), eps = static_cast<T>(state.hyper.epsilon);
  const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
  const T inv_c1 = static_cast<T>(1.0 / c1), inv_c2 = static_cast<T>(1.0 / c2);

  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i]->ptr();
    T* m = state.m[i].ptr();
    T* v = state.v[i].ptr();
    const T* g = grads[i] ? grads[i]->ptr() : nullptr;
    const long n = static_cast<long>(params[i]->numel());
#pragma omp parallel for simd schedule(static)
    for (long j = 0; j < n; ++j) {
      const T gj = g ? g[j] : T{0};
      m[j] = tb1 * m[j] + (T{1} - tb1) * gj;
      v[j] = tb2 * v[j] + (T{1} - tb2) * gj * gj;
      const T mhat = m[j] * inv_c1;
      const T vhat = v[j] * inv_c2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template <typename T>
void adam_step(std::vector<Var<T>>& params, AdamState<T>& state) {
  std::vector<Tensor<T>*> values;
  std::vector<const Tensor<T>*> grads;
  for (auto& p : params) {
    values.push_back(&p.mutable_value());
    grads.push_back(p.has_grad() ? &p.grad() : nullptr);
  }
  adam_step(values, grads, state);
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::vector<Var<float>>&, AdamState<float>&);
template void adam_step(std::vector<Var<double>>&, AdamState<double>&);
template void adam_step(std::vector<Tensor<float>*>, const std::vector<const Tensor<float>*>&, AdamState<float>&);
template void adam_step(std::vector<Tensor<double>*>, const std::vector<const Tensor<double>*>&, AdamState<double>&);

}  // namespace qtae
