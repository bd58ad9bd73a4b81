#include "qtae/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace qtae {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {
void check_extents(const Shape& shape) {
  for (auto e : shape) require(e > 0, "tensor extents must be positive, got " + shape_str(shape));
}
}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_numel(shape_), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  require(data_.size() == shape_numel(shape_),
          "data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
void Tensor<T>::reshape(Shape shape) {
  check_extents(shape);
  require(shape_numel(shape) == data_.size(),
          "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  shape_ = std::move(shape);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  Tensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

template <typename T>
bool Tensor<T>::all_finite() const noexcept {
  bool ok = true;
  for (T v : data_) ok &= std::isfinite(v);
  return ok;
}

template <typename T>
void Tensor<T>::require_finite(const char* where) const {
  if (!all_finite()) throw NumericError(std::string("non-finite value in ") + where);
}

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.numel() == b.numel(), "dot: size mismatch");
  T acc{0};
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T l2_norm(const Tensor<T>& a) {
  return std::sqrt(dot(a, a));
}

template class Tensor<float>;
template class Tensor<double>;
template float dot(const Tensor<float>&, const Tensor<float>&);
template double dot(const Tensor<double>&, const Tensor<double>&);
template float l2_norm(const Tensor<float>&);
template double l2_norm(const Tensor<double>&);

}  // namespace qtae
