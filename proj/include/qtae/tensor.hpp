#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qtae/errors.hpp"

namespace qtae {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array. Extents are positive; data length is their product.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* ptr() noexcept { return data_.data(); }
  const T* ptr() const noexcept { return data_.data(); }
  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  void fill(T value);
  /// Same data, new extents; element count must match.
  void reshape(Shape shape);
  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;
  /// Throws NumericError naming `where` if any element is NaN/Inf.
  void require_finite(const char* where) const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
T l2_norm(const Tensor<T>& a);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace qtae
